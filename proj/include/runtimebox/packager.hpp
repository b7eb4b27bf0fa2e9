/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Authoring a runtime: a root tree on disk is initialised, edited from
// inside a sandbox that writes straight into it, and committed to a repo.
//
// The marker file `.runtimebox-work` at the tree root is line oriented:
//
//   runtimebox-work-v1
//   session <pid>        only while an authoring sandbox is open

#include "runtimebox/casstore.hpp"
#include "runtimebox/sandbox.hpp"

#include <cstdint>
#include <optional>
#include <string>

namespace runtimebox {

inline constexpr std::string_view work_marker_name = ".runtimebox-work";

/// Throws NotARootTree when the directory has neither bin/ nor usr/bin/.
void initialise(const fs::path &tree);

bool is_initialised(const fs::path &tree);

/// Opens a shell (or options.command) with `tree` as a writable root.
/// Throws NotInitialised, SandboxRunning, KernelUnsupported.
int author_sandbox(const fs::path &tree, const RunOptions &options = {});

struct CommitOptions {
    std::string subject;
    std::optional<std::int64_t> timestamp;
};

/// Snapshots `tree` without the marker and advances the local ref.
/// Throws NotInitialised, ManifestSyntax, ManifestType, EmptyCommit.
ObjectId commit_runtime(Repo &repo, const RuntimeRef &ref, const fs::path &tree, const CommitOptions &options = {});

} // namespace runtimebox
