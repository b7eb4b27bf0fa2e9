/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/fsutil.hpp"

#include "runtimebox/error.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/stat.h>
#include <sys/xattr.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstdlib>
#include <cstring>

namespace runtimebox::fsutil {

UniqueFd &UniqueFd::operator=(UniqueFd &&other) noexcept
{
    if (this != &other) {
        reset(other.release());
    }
    return *this;
}

UniqueFd::~UniqueFd()
{
    reset();
}

void UniqueFd::reset(int fd) noexcept
{
    if (fd_ >= 0) {
        ::close(fd_);
    }
    fd_ = fd;
}

namespace {

UniqueFd open_lock_file(const fs::path &path)
{
    UniqueFd fd(::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644));
    if (!fd) {
        throw_errno(errno == EACCES || errno == EROFS ? ErrorCode::NotWritable : ErrorCode::IoError,
                    "open lock " + path.string(), errno);
    }
    return fd;
}

std::string temp_suffix()
{
    static std::atomic<unsigned> counter{0};
    return ".tmp." + std::to_string(::getpid()) + "." + std::to_string(counter++);
}

} // namespace

FileLock::FileLock(const fs::path &path, Mode mode)
    : fd_(open_lock_file(path))
{
    int op = mode == Mode::Shared ? LOCK_SH : LOCK_EX;
    while (::flock(fd_.get(), op) != 0) {
        if (errno != EINTR) {
            throw_errno(ErrorCode::IoError, "flock " + path.string(), errno);
        }
    }
}

FileLock FileLock::try_lock(const fs::path &path, Mode mode)
{
    FileLock lock;
    lock.fd_ = open_lock_file(path);
    int op = (mode == Mode::Shared ? LOCK_SH : LOCK_EX) | LOCK_NB;
    if (::flock(lock.fd_.get(), op) != 0) {
        if (errno != EWOULDBLOCK) {
            throw_errno(ErrorCode::IoError, "flock " + path.string(), errno);
        }
        lock.fd_.reset();
    }
    return lock;
}

std::string read_file(const fs::path &path)
{
    UniqueFd fd(::open(path.c_str(), O_RDONLY | O_CLOEXEC));
    if (!fd) {
        throw_errno(ErrorCode::IoError, "open " + path.string(), errno);
    }
    std::string out;
    char buf[65536];
    for (;;) {
        auto n = ::read(fd.get(), buf, sizeof buf);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno(ErrorCode::IoError, "read " + path.string(), errno);
        }
        if (n == 0) {
            break;
        }
        out.append(buf, static_cast<std::size_t>(n));
    }
    return out;
}

void write_all(int fd, std::string_view data, const fs::path &what)
{
    while (!data.empty()) {
        auto n = ::write(fd, data.data(), data.size());
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno(ErrorCode::IoError, "write " + what.string(), errno);
        }
        data.remove_prefix(static_cast<std::size_t>(n));
    }
}

void write_file_atomic(const fs::path &path, std::string_view data, mode_t mode,
                       const fs::path &temp_dir)
{
    auto tmp = temp_dir.empty() ? path : temp_dir / path.filename();
    tmp += temp_suffix();
    UniqueFd fd(::open(tmp.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, mode));
    if (!fd) {
        throw_errno(errno == EACCES || errno == EROFS ? ErrorCode::NotWritable : ErrorCode::IoError,
                    "create " + tmp.string(), errno);
    }
    try {
        write_all(fd.get(), data, tmp);
        if (::fsync(fd.get()) != 0) {
            throw_errno(ErrorCode::IoError, "fsync " + tmp.string(), errno);
        }
        fd.reset();
        if (::rename(tmp.c_str(), path.c_str()) != 0) {
            throw_errno(ErrorCode::IoError, "rename " + tmp.string(), errno);
        }
    } catch (...) {
        ::unlink(tmp.c_str());
        throw;
    }
}

bool is_empty_dir(const fs::path &path)
{
    std::error_code ec;
    return fs::is_directory(path, ec) && fs::directory_iterator(path, ec) == fs::directory_iterator();
}

namespace {

void make_traversable(const fs::path &dir)
{
    struct stat st{};
    if (::lstat(dir.c_str(), &st) == 0 && S_ISDIR(st.st_mode)
        && (st.st_mode & S_IRWXU) != S_IRWXU) {
        ::chmod(dir.c_str(), (st.st_mode & 07777) | S_IRWXU);
    }
}

void remove_children(const fs::path &dir)
{
    make_traversable(dir);
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
        const auto &p = it->path();
        if (it->is_directory(ec) && !it->is_symlink(ec)) {
            remove_children(p);
            if (::rmdir(p.c_str()) != 0) {
                throw_errno(ErrorCode::IoError, "rmdir " + p.string(), errno);
            }
        } else if (::unlink(p.c_str()) != 0 && errno != ENOENT) {
            throw_errno(ErrorCode::IoError, "unlink " + p.string(), errno);
        }
    }
    if (ec) {
        throw Error(ErrorCode::IoError, "list " + dir.string() + ": " + ec.message());
    }
}

} // namespace

void remove_tree(const fs::path &path)
{
    struct stat st{};
    if (::lstat(path.c_str(), &st) != 0) {
        if (errno == ENOENT) {
            return;
        }
        throw_errno(ErrorCode::IoError, "stat " + path.string(), errno);
    }
    if (S_ISDIR(st.st_mode)) {
        remove_children(path);
        if (::rmdir(path.c_str()) != 0) {
            throw_errno(ErrorCode::IoError, "rmdir " + path.string(), errno);
        }
    } else if (::unlink(path.c_str()) != 0) {
        throw_errno(ErrorCode::IoError, "unlink " + path.string(), errno);
    }
}

void clear_directory(const fs::path &dir)
{
    if (fs::is_directory(dir)) {
        remove_children(dir);
    }
}

bool supports_user_xattrs(const fs::path &dir)
{
    auto probe = dir / (".xattr-probe" + temp_suffix());
    UniqueFd fd(::open(probe.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0600));
    if (!fd) {
        throw_errno(errno == EACCES || errno == EROFS ? ErrorCode::NotWritable : ErrorCode::IoError,
                    "create " + probe.string(), errno);
    }
    static constexpr char name[] = "user.runtimebox.probe";
    static constexpr char value[] = "1";
    char back[4] = {};
    bool ok = ::fsetxattr(fd.get(), name, value, 1, 0) == 0
              && ::fgetxattr(fd.get(), name, back, sizeof back) == 1 && back[0] == '1';
    fd.reset();
    ::unlink(probe.c_str());
    return ok;
}

void require_user_xattrs(const fs::path &dir, std::string_view env_hint)
{
    if (!supports_user_xattrs(dir)) {
        throw Error(ErrorCode::XattrUnsupported,
                    dir.string()
                        + " is on a filesystem without extended attribute support (e.g. NFS or "
                          "NTFS); point "
                        + std::string(env_hint)
                        + " at a directory on a filesystem with extended attributes enabled");
    }
}

std::string env_or(const char *name, std::string_view fallback)
{
    const char *value = std::getenv(name);
    if (value == nullptr || *value == '\0') {
        return std::string(fallback);
    }
    return value;
}

} // namespace runtimebox::fsutil
