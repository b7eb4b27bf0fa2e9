/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace runtimebox {

enum class ErrorCode {
    UsageError,
    MalformedRef,
    ManifestSyntax,
    ManifestType,
    EmptyCommand,
    MalformedCommand,
    NotWritable,
    CorruptRepo,
    XattrUnsupported,
    IoError,
    UnsupportedEntry,
    MissingObject,
    CrossDevice,
    DestNotEmpty,
    DuplicateRemote,
    UnknownRemote,
    MalformedUrl,
    RefNotFound,
    DigestMismatch,
    NetworkError,
    IncompleteClosure,
    FsckFailed,
    AlreadyDeployed,
    NotDeployed,
    SandboxRunning,
    MalformedBind,
    KernelUnsupported,
    MountFailed,
    LaunchFailed,
    NotARootTree,
    NotInitialised,
    EmptyCommit,
};

/// Taxonomy name used in diagnostics, e.g. "NetworkError".
std::string_view error_name(ErrorCode code) noexcept;

/// True for failures caused by the host environment (kernel, filesystem,
/// network, store integrity) rather than by the invocation itself.
bool is_environment_error(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(message)
        , code_(code)
    {
    }

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void throw_errno(ErrorCode code, const std::string &what, int err);

} // namespace runtimebox
