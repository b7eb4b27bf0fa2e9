/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/error.hpp"

#include <cstring>

namespace runtimebox {

std::string_view error_name(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::MalformedRef: return "MalformedRef";
    case ErrorCode::ManifestSyntax: return "ManifestSyntax";
    case ErrorCode::ManifestType: return "ManifestType";
    case ErrorCode::EmptyCommand: return "EmptyCommand";
    case ErrorCode::MalformedCommand: return "MalformedCommand";
    case ErrorCode::NotWritable: return "NotWritable";
    case ErrorCode::CorruptRepo: return "CorruptRepo";
    case ErrorCode::XattrUnsupported: return "XattrUnsupported";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UnsupportedEntry: return "UnsupportedEntry";
    case ErrorCode::MissingObject: return "MissingObject";
    case ErrorCode::CrossDevice: return "CrossDevice";
    case ErrorCode::DestNotEmpty: return "DestNotEmpty";
    case ErrorCode::DuplicateRemote: return "DuplicateRemote";
    case ErrorCode::UnknownRemote: return "UnknownRemote";
    case ErrorCode::MalformedUrl: return "MalformedUrl";
    case ErrorCode::RefNotFound: return "RefNotFound";
    case ErrorCode::DigestMismatch: return "DigestMismatch";
    case ErrorCode::NetworkError: return "NetworkError";
    case ErrorCode::IncompleteClosure: return "IncompleteClosure";
    case ErrorCode::FsckFailed: return "FsckFailed";
    case ErrorCode::AlreadyDeployed: return "AlreadyDeployed";
    case ErrorCode::NotDeployed: return "NotDeployed";
    case ErrorCode::SandboxRunning: return "SandboxRunning";
    case ErrorCode::MalformedBind: return "MalformedBind";
    case ErrorCode::KernelUnsupported: return "KernelUnsupported";
    case ErrorCode::MountFailed: return "MountFailed";
    case ErrorCode::LaunchFailed: return "LaunchFailed";
    case ErrorCode::NotARootTree: return "NotARootTree";
    case ErrorCode::NotInitialised: return "NotInitialised";
    case ErrorCode::EmptyCommit: return "EmptyCommit";
    }
    return "UnknownError";
}

bool is_environment_error(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::NotWritable:
    case ErrorCode::CorruptRepo:
    case ErrorCode::XattrUnsupported:
    case ErrorCode::IoError:
    case ErrorCode::MissingObject:
    case ErrorCode::CrossDevice:
    case ErrorCode::DigestMismatch:
    case ErrorCode::NetworkError:
    case ErrorCode::IncompleteClosure:
    case ErrorCode::FsckFailed:
    case ErrorCode::KernelUnsupported:
    case ErrorCode::MountFailed:
    case ErrorCode::LaunchFailed:
        return true;
    default:
        return false;
    }
}

void throw_errno(ErrorCode code, const std::string &what, int err)
{
    throw Error(code, what + ": " + std::strerror(err));
}

} // namespace runtimebox
