/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <sys/types.h>

#include <filesystem>
#include <string>
#include <string_view>

namespace runtimebox::fsutil {

namespace fs = std::filesystem;

/// Owning file descriptor.
class UniqueFd {
public:
    UniqueFd() = default;
    explicit UniqueFd(int fd)
        : fd_(fd)
    {
    }
    UniqueFd(UniqueFd &&other) noexcept
        : fd_(other.release())
    {
    }
    UniqueFd &operator=(UniqueFd &&other) noexcept;
    UniqueFd(const UniqueFd &) = delete;
    UniqueFd &operator=(const UniqueFd &) = delete;
    ~UniqueFd();

    int get() const noexcept { return fd_; }
    explicit operator bool() const noexcept { return fd_ >= 0; }
    int release() noexcept
    {
        int fd = fd_;
        fd_ = -1;
        return fd;
    }
    void reset(int fd = -1) noexcept;

private:
    int fd_{-1};
};

/// flock(2)-based advisory lock held for the lifetime of the object.
class FileLock {
public:
    enum class Mode { Shared, Exclusive };

    FileLock(const fs::path &path, Mode mode);

    /// Returns an unlocked (empty) FileLock when the lock is already taken.
    static FileLock try_lock(const fs::path &path, Mode mode);

    explicit operator bool() const noexcept { return static_cast<bool>(fd_); }

private:
    FileLock() = default;
    UniqueFd fd_;
};

std::string read_file(const fs::path &path);
void write_all(int fd, std::string_view data, const fs::path &what);

/// Writes `data` to a temporary file and renames it over `path`. The
/// temporary lives next to `path` unless `temp_dir` (same filesystem) is given.
void write_file_atomic(const fs::path &path, std::string_view data, mode_t mode = 0644,
                       const fs::path &temp_dir = {});

bool is_empty_dir(const fs::path &path);

/// Removes `path` recursively, restoring owner permissions on directories
/// that were left unreadable (overlay work directories are created 0000).
void remove_tree(const fs::path &path);

/// Removes the contents of `dir` but not `dir` itself.
void clear_directory(const fs::path &dir);

/// Sets and reads back a user.* extended attribute on a scratch file in `dir`.
bool supports_user_xattrs(const fs::path &dir);

/// Throws XattrUnsupported with a remediation hint naming `env_hint`.
void require_user_xattrs(const fs::path &dir, std::string_view env_hint);

/// Environment lookup; empty values count as unset.
std::string env_or(const char *name, std::string_view fallback);

} // namespace runtimebox::fsutil
