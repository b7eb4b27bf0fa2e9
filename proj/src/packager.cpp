/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/packager.hpp"

#include "runtimebox/error.hpp"
#include "runtimebox/fsutil.hpp"

#include <unistd.h>

#include <chrono>
#include <fstream>

namespace runtimebox {

namespace {

constexpr std::string_view marker_header = "runtimebox-work-v1\n";
constexpr std::string_view skeleton_manifest = "[Core]\n\n[Meta]\n";

fs::path marker_path(const fs::path &tree)
{
    return tree / work_marker_name;
}

void require_initialised(const fs::path &tree)
{
    if (!is_initialised(tree)) {
        throw Error(ErrorCode::NotInitialised,
                    tree.string() + " is not an authoring tree; run package --initialise on it first");
    }
}

// Rewritten in place so the flock held on the marker stays valid.
void rewrite_marker(const fs::path &tree, const std::string &text)
{
    std::ofstream out(marker_path(tree), std::ios::binary | std::ios::trunc);
    out << text;
    if (!out.flush()) {
        throw Error(ErrorCode::IoError, "cannot write " + marker_path(tree).string());
    }
}

bool is_marker(const fs::path &relative)
{
    return relative == fs::path(work_marker_name);
}

} // namespace

void initialise(const fs::path &tree)
{
    std::error_code ec;
    if (!fs::is_directory(tree / "bin", ec) && !fs::is_directory(tree / "usr" / "bin", ec)) {
        throw Error(ErrorCode::NotARootTree,
                    tree.string() + " does not look like a root filesystem (no bin/ or usr/bin/)");
    }
    if (!fs::exists(marker_path(tree), ec)) {
        fsutil::write_file_atomic(marker_path(tree), marker_header);
    }
    auto manifest = tree / "manifest.toml";
    if (!fs::exists(fs::symlink_status(manifest, ec))) {
        fsutil::write_file_atomic(manifest, skeleton_manifest);
    }
}

bool is_initialised(const fs::path &tree)
{
    std::error_code ec;
    return fs::is_regular_file(fs::symlink_status(marker_path(tree), ec));
}

int author_sandbox(const fs::path &tree, const RunOptions &options)
{
    require_initialised(tree);
    check_kernel_support();
    auto root = fs::absolute(tree).lexically_normal();
    if (!root.has_filename()) {
        root = root.parent_path();
    }
    auto lock = fsutil::FileLock::try_lock(marker_path(root), fsutil::FileLock::Mode::Exclusive);
    if (!lock) {
        throw Error(ErrorCode::SandboxRunning, "another authoring session is open on " + root.string());
    }
    auto plan = build_direct_plan(root, root.filename().string(), options);
    std::error_code ec;
    fs::create_directories(options.host.home / "Public", ec);

    rewrite_marker(root, std::string(marker_header) + "session " + std::to_string(::getpid()) + "\n");
    int status;
    try {
        status = launch(plan);
    } catch (...) {
        rewrite_marker(root, std::string(marker_header));
        throw;
    }
    rewrite_marker(root, std::string(marker_header));
    return status;
}

ObjectId commit_runtime(Repo &repo, const RuntimeRef &ref, const fs::path &tree, const CommitOptions &options)
{
    require_initialised(tree);
    auto manifest = tree / "manifest.toml";
    std::error_code ec;
    if (fs::is_regular_file(fs::symlink_status(manifest, ec))) {
        parse_manifest(fsutil::read_file(manifest));
    }
    auto parent = repo.read_ref(ref);
    auto tree_id = repo.hash_tree(tree, is_marker);
    if (parent && repo.read_commit(*parent).tree == tree_id) {
        throw Error(ErrorCode::EmptyCommit,
                    format_runtime_ref(ref) + " already points at this tree; nothing to commit");
    }
    tree_id = repo.store_tree(tree, is_marker);
    auto timestamp = options.timestamp.value_or(
        std::chrono::duration_cast<std::chrono::seconds>(std::chrono::system_clock::now().time_since_epoch())
            .count());
    auto subject = options.subject.empty() ? "Publish " + format_runtime_ref(ref) : options.subject;
    auto commit = repo.commit(tree_id, parent, subject, {}, timestamp);
    repo.update_ref(ref, commit);
    return commit;
}

} // namespace runtimebox
