/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include "runtimebox/error.hpp"
#include "runtimebox/refmodel.hpp"
#include "runtimebox/sandbox.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace runtimebox::cli {

namespace fs = std::filesystem;

enum class Action {
    Help,
    Version,
    Deploy,
    Run,
    Update,
    Reset,
    List,
    Remove,
    PackageInitialise,
    PackageSandbox,
    PackageCommit,
    RemoteAdd,
    RemoteList,
    RepoExport,
    RepoFsck,
};

std::string_view action_name(Action action) noexcept;

struct Invocation {
    Action action{Action::Help};
    std::optional<RuntimeRef> ref;
    std::optional<std::string> command;
    std::vector<BindMount> binds;
    bool dry_run{false};
    bool json{false};
    std::optional<std::string> remote;
    fs::path path;
    std::string name;
    std::string url;
    /// Filled for Help and Version.
    std::string text;
};

/// Parses the arguments after the program name. Throws UsageError,
/// MalformedRef or MalformedBind.
Invocation parse_invocation(const std::vector<std::string> &args);

/// Splits a shell-style command line ("maps -d x/y/z") and parses everything
/// after the first word.
Invocation parse_command_line(std::string_view line);

std::string help_text();

/// Exit status: 0 success, 1 usage error, 2 environment error; for a run,
/// the payload's own status.
int execute(const Invocation &invocation, std::ostream &out, std::ostream &err);

int main(int argc, char **argv, std::ostream &out, std::ostream &err);

/// Single-line diagnostic naming the error kind.
std::string diagnostic(const std::exception &e);

int exit_code_for(ErrorCode code) noexcept;

} // namespace runtimebox::cli
