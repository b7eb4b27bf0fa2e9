/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Test-only helpers. Nothing here calls into the store or the sandbox: the
// directory diff, random tree generator and process helpers are independent
// of the code paths they are used to check.

#include <sys/types.h>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

namespace fs = std::filesystem;

class TempDir {
public:
    explicit TempDir(const std::string &prefix = "rtbx");
    ~TempDir();
    TempDir(const TempDir &) = delete;
    TempDir &operator=(const TempDir &) = delete;

    const fs::path &path() const { return path_; }
    fs::path operator/(const std::string &rel) const { return path_ / rel; }

private:
    fs::path path_;
};

/// Recursively compares two trees: entry kinds, file bytes, owner-exec bit,
/// symlink targets. Returns one line per difference.
std::vector<std::string> diff_trees(const fs::path &a, const fs::path &b);

struct RandomTreeParams {
    int max_depth = 4;
    int max_entries = 50;
    std::size_t max_file_size = 64 * 1024;
};

/// Fills `root` (an existing empty directory) with a random tree of regular
/// files, directories and symlinks. Returns the number of entries created.
int make_random_tree(const fs::path &root, std::mt19937_64 &rng, const RandomTreeParams &params = {});

void write_file(const fs::path &path, const std::string &content, bool executable = false);
std::string read_file(const fs::path &path);

/// Number of files under `dir` (recursive, regular files only).
std::size_t count_files(const fs::path &dir);

/// Relative paths of all regular files under `dir`, with their bytes.
std::map<std::string, std::string> snapshot_files(const fs::path &dir);

struct ProcessResult {
    int exit_code = -1;          // -1 when killed by a signal
    int signal = 0;
    std::string out;
    std::string err;
};

/// Runs argv with `env` added on top of (or replacing, when clear_env) the
/// current environment; captures stdout and stderr.
ProcessResult run_process(const std::vector<std::string> &argv,
                          const std::map<std::string, std::string> &env = {}, bool clear_env = false,
                          const std::string &stdin_data = {});

/// Runs `fn` in a forked child; returns its exit status (128 + signal when
/// killed). Exceptions escaping fn exit with status 120.
int run_in_child(const std::function<int()> &fn);

/// Whether unprivileged user + mount namespaces and overlay mounts work here.
bool namespaces_available();

/// True when `path` (or anything below it) appears in this process's mount table.
bool is_mounted_under(const fs::path &path);

/// Builds a minimal runnable root filesystem from host binaries (shell and a
/// few coreutils) and the shared libraries they need.
void make_fixture_rootfs(const fs::path &root);

/// Sets environment variables for the lifetime of the object.
class ScopedEnv {
public:
    explicit ScopedEnv(const std::map<std::string, std::string> &vars);
    ~ScopedEnv();

private:
    std::map<std::string, std::optional<std::string>> saved_;
};

} // namespace testsupport
