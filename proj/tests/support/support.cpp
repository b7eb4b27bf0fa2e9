/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "support.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <sys/mount.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <stdexcept>

extern char **environ;

namespace testsupport {

TempDir::TempDir(const std::string &prefix)
{
    auto base = fs::temp_directory_path() / (prefix + "-XXXXXX");
    std::string tmpl = base.string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
        throw std::runtime_error("mkdtemp failed");
    }
    path_ = tmpl;
}

TempDir::~TempDir()
{
    // Restore write permission on read-only files and directories first.
    std::error_code ec;
    for (auto it = fs::recursive_directory_iterator(path_, fs::directory_options::skip_permission_denied, ec);
         !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (it->is_directory(ec) && !it->is_symlink(ec)) {
            ::chmod(it->path().c_str(), 0755);
        }
    }
    ::chmod(path_.c_str(), 0755);
    fs::remove_all(path_, ec);
}

namespace {

struct Node {
    enum Kind { File, Dir, Link, Other } kind;
    bool exec = false;
};

Node classify(const fs::path &p)
{
    struct stat st{};
    if (::lstat(p.c_str(), &st) != 0) {
        throw std::runtime_error("lstat " + p.string());
    }
    if (S_ISREG(st.st_mode)) {
        return {Node::File, (st.st_mode & S_IXUSR) != 0};
    }
    if (S_ISDIR(st.st_mode)) {
        return {Node::Dir};
    }
    if (S_ISLNK(st.st_mode)) {
        return {Node::Link};
    }
    return {Node::Other};
}

std::set<std::string> names(const fs::path &dir)
{
    std::set<std::string> out;
    for (const auto &e : fs::directory_iterator(dir)) {
        out.insert(e.path().filename().string());
    }
    return out;
}

void diff_into(const fs::path &a, const fs::path &b, const std::string &rel,
               std::vector<std::string> &out)
{
    auto na = names(a);
    auto nb = names(b);
    for (const auto &n : na) {
        if (!nb.contains(n)) {
            out.push_back("only in left: " + rel + n);
        }
    }
    for (const auto &n : nb) {
        if (!na.contains(n)) {
            out.push_back("only in right: " + rel + n);
        }
    }
    for (const auto &n : na) {
        if (!nb.contains(n)) {
            continue;
        }
        auto pa = a / n;
        auto pb = b / n;
        auto ca = classify(pa);
        auto cb = classify(pb);
        if (ca.kind != cb.kind) {
            out.push_back("kind differs: " + rel + n);
            continue;
        }
        switch (ca.kind) {
        case Node::File:
            if (ca.exec != cb.exec) {
                out.push_back("exec bit differs: " + rel + n);
            }
            if (read_file(pa) != read_file(pb)) {
                out.push_back("content differs: " + rel + n);
            }
            break;
        case Node::Link:
            if (fs::read_symlink(pa) != fs::read_symlink(pb)) {
                out.push_back("symlink target differs: " + rel + n);
            }
            break;
        case Node::Dir:
            diff_into(pa, pb, rel + n + "/", out);
            break;
        case Node::Other:
            out.push_back("special file: " + rel + n);
            break;
        }
    }
}

std::string random_name(std::mt19937_64 &rng)
{
    static const std::string alphabet = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.+ ";
    std::uniform_int_distribution<int> len(1, 12);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    for (;;) {
        std::string s;
        int n = len(rng);
        for (int i = 0; i < n; ++i) {
            s += alphabet[pick(rng)];
        }
        if (s != "." && s != "..") {
            return s;
        }
    }
}

void fill(const fs::path &dir, int depth, std::mt19937_64 &rng, const RandomTreeParams &params,
          int &budget, std::vector<fs::path> &files)
{
    std::uniform_int_distribution<int> count(0, 8);
    std::uniform_int_distribution<int> kind(0, 9);
    int n = count(rng);
    for (int i = 0; i < n && budget > 0; ++i) {
        auto p = dir / random_name(rng);
        if (fs::exists(fs::symlink_status(p))) {
            continue;
        }
        --budget;
        int k = kind(rng);
        if (k < 6) {
            // Small files dominate, with the occasional large one and some
            // exact duplicates of earlier files.
            std::string content;
            std::uniform_int_distribution<int> dup(0, 9);
            if (!files.empty() && dup(rng) == 0) {
                std::uniform_int_distribution<std::size_t> which(0, files.size() - 1);
                content = read_file(files[which(rng)]);
            } else {
                std::uniform_int_distribution<std::size_t> big(0, 9);
                std::size_t max = big(rng) == 0 ? params.max_file_size : 512;
                std::uniform_int_distribution<std::size_t> size(0, max);
                content.resize(size(rng));
                for (auto &c : content) {
                    c = static_cast<char>(rng() & 0xff);
                }
            }
            write_file(p, content, (rng() & 3) == 0);
            files.push_back(p);
        } else if (k < 8 && depth < params.max_depth) {
            fs::create_directory(p);
            fill(p, depth + 1, rng, params, budget, files);
        } else {
            static const char *targets[] = {"b/c", "../x", "/etc/passwd", "dangling", "."};
            std::uniform_int_distribution<int> t(0, 4);
            fs::create_symlink(targets[t(rng)], p);
        }
    }
}

} // namespace

std::vector<std::string> diff_trees(const fs::path &a, const fs::path &b)
{
    std::vector<std::string> out;
    diff_into(a, b, "", out);
    return out;
}

int make_random_tree(const fs::path &root, std::mt19937_64 &rng, const RandomTreeParams &params)
{
    int budget = params.max_entries;
    std::vector<fs::path> files;
    fill(root, 1, rng, params, budget, files);
    return params.max_entries - budget;
}

void write_file(const fs::path &path, const std::string &content, bool executable)
{
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw std::runtime_error("cannot write " + path.string());
        }
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
    }
    fs::permissions(path, executable ? fs::perms(0755) : fs::perms(0644));
}

std::string read_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot read " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_files(const fs::path &dir)
{
    std::size_t n = 0;
    for (const auto &e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && !e.is_symlink()) {
            ++n;
        }
    }
    return n;
}

std::map<std::string, std::string> snapshot_files(const fs::path &dir)
{
    std::map<std::string, std::string> out;
    for (const auto &e : fs::recursive_directory_iterator(dir)) {
        if (e.is_regular_file() && !e.is_symlink()) {
            out[fs::relative(e.path(), dir).string()] = read_file(e.path());
        }
    }
    return out;
}

ProcessResult run_process(const std::vector<std::string> &argv,
                          const std::map<std::string, std::string> &env, bool clear_env,
                          const std::string &stdin_data)
{
    int out_pipe[2], err_pipe[2], in_pipe[2];
    if (::pipe2(out_pipe, O_CLOEXEC) != 0 || ::pipe2(err_pipe, O_CLOEXEC) != 0
        || ::pipe2(in_pipe, O_CLOEXEC) != 0) {
        throw std::runtime_error("pipe failed");
    }

    std::map<std::string, std::string> merged;
    if (!clear_env) {
        for (char **e = environ; *e != nullptr; ++e) {
            std::string kv = *e;
            auto eq = kv.find('=');
            if (eq != std::string::npos) {
                merged[kv.substr(0, eq)] = kv.substr(eq + 1);
            }
        }
    }
    for (const auto &[k, v] : env) {
        merged[k] = v;
    }
    std::vector<std::string> env_strings;
    for (const auto &[k, v] : merged) {
        env_strings.push_back(k + "=" + v);
    }
    std::vector<char *> envp;
    for (auto &s : env_strings) {
        envp.push_back(s.data());
    }
    envp.push_back(nullptr);
    std::vector<std::string> args = argv;
    std::vector<char *> cargv;
    for (auto &a : args) {
        cargv.push_back(a.data());
    }
    cargv.push_back(nullptr);

    pid_t pid = ::fork();
    if (pid < 0) {
        throw std::runtime_error("fork failed");
    }
    if (pid == 0) {
        ::dup2(in_pipe[0], 0);
        ::dup2(out_pipe[1], 1);
        ::dup2(err_pipe[1], 2);
        ::execve(cargv[0], cargv.data(), envp.data());
        ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    if (!stdin_data.empty()) {
        auto n = ::write(in_pipe[1], stdin_data.data(), stdin_data.size());
        (void)n;
    }
    ::close(in_pipe[1]);

    ProcessResult result;
    pollfd fds[2] = {{out_pipe[0], POLLIN, 0}, {err_pipe[0], POLLIN, 0}};
    std::string *sinks[2] = {&result.out, &result.err};
    int open_count = 2;
    char buf[4096];
    while (open_count > 0) {
        if (::poll(fds, 2, -1) < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        for (int i = 0; i < 2; ++i) {
            if (fds[i].fd >= 0 && (fds[i].revents & (POLLIN | POLLHUP | POLLERR))) {
                auto n = ::read(fds[i].fd, buf, sizeof buf);
                if (n <= 0) {
                    ::close(fds[i].fd);
                    fds[i].fd = -1;
                    --open_count;
                } else {
                    sinks[i]->append(buf, static_cast<std::size_t>(n));
                }
            }
        }
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.signal = WTERMSIG(status);
    }
    return result;
}

int run_in_child(const std::function<int()> &fn)
{
    std::cout.flush();
    std::cerr.flush();
    pid_t pid = ::fork();
    if (pid < 0) {
        throw std::runtime_error("fork failed");
    }
    if (pid == 0) {
        int rc = 120;
        try {
            rc = fn();
        } catch (const std::exception &e) {
            std::fprintf(stderr, "child: %s\n", e.what());
        } catch (...) {
        }
        std::fflush(nullptr);
        ::_exit(rc);
    }
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    if (WIFEXITED(status)) {
        return WEXITSTATUS(status);
    }
    return 128 + WTERMSIG(status);
}

namespace {

bool write_text(const std::string &path, const std::string &text)
{
    int fd = ::open(path.c_str(), O_WRONLY | O_CLOEXEC);
    if (fd < 0) {
        return false;
    }
    bool ok = ::write(fd, text.data(), text.size()) == static_cast<ssize_t>(text.size());
    ::close(fd);
    return ok;
}

} // namespace

bool namespaces_available()
{
    static const bool available = [] {
        TempDir dir("rtbx-probe");
        for (const char *sub : {"l", "u", "w", "m"}) {
            fs::create_directory(dir.path() / sub);
        }
        write_file(dir.path() / "l" / "a", "x");
        auto uid = ::getuid();
        auto gid = ::getgid();
        int rc = run_in_child([&] {
            if (::unshare(CLONE_NEWUSER | CLONE_NEWNS) != 0) {
                return 1;
            }
            write_text("/proc/self/setgroups", "deny");
            if (!write_text("/proc/self/uid_map", "0 " + std::to_string(uid) + " 1")
                || !write_text("/proc/self/gid_map", "0 " + std::to_string(gid) + " 1")) {
                return 2;
            }
            auto opts = "lowerdir=" + (dir.path() / "l").string() + ",upperdir="
                        + (dir.path() / "u").string() + ",workdir=" + (dir.path() / "w").string();
            if (::mount("overlay", (dir.path() / "m").c_str(), "overlay", 0, opts.c_str()) != 0) {
                return 3;
            }
            return fs::exists(dir.path() / "m" / "a") ? 0 : 4;
        });
        return rc == 0;
    }();
    return available;
}

bool is_mounted_under(const fs::path &path)
{
    std::ifstream in("/proc/self/mountinfo");
    std::string line;
    auto target = fs::weakly_canonical(path).string();
    while (std::getline(in, line)) {
        std::istringstream fields(line);
        std::string id, parent, devno, root, mountpoint;
        fields >> id >> parent >> devno >> root >> mountpoint;
        std::string decoded;
        for (std::size_t i = 0; i < mountpoint.size(); ++i) {
            if (mountpoint[i] == '\\' && i + 3 < mountpoint.size()) {
                decoded += static_cast<char>(std::stoi(mountpoint.substr(i + 1, 3), nullptr, 8));
                i += 3;
            } else {
                decoded += mountpoint[i];
            }
        }
        if (decoded == target || decoded.rfind(target + "/", 0) == 0) {
            return true;
        }
    }
    return false;
}

namespace {

std::vector<std::string> shared_libraries(const fs::path &binary)
{
    auto result = run_process({"/usr/bin/ldd", binary.string()});
    std::vector<std::string> libs;
    std::istringstream in(result.out);
    std::string line;
    while (std::getline(in, line)) {
        auto arrow = line.find("=> ");
        std::string path;
        if (arrow != std::string::npos) {
            path = line.substr(arrow + 3);
        } else {
            auto start = line.find_first_not_of(" \t");
            if (start != std::string::npos && line[start] == '/') {
                path = line.substr(start);
            }
        }
        auto paren = path.find(" (");
        if (paren != std::string::npos) {
            path = path.substr(0, paren);
        }
        if (!path.empty() && path.front() == '/') {
            libs.push_back(path);
        }
    }
    return libs;
}

void copy_host_file(const fs::path &host, const fs::path &dest)
{
    fs::create_directories(dest.parent_path());
    if (fs::exists(fs::symlink_status(dest))) {
        return;
    }
    fs::copy_file(fs::canonical(host), dest);
    fs::permissions(dest, fs::perms(0755));
}

} // namespace

void make_fixture_rootfs(const fs::path &root)
{
    fs::create_directories(root / "bin");
    fs::create_directories(root / "usr" / "bin");
    fs::create_directories(root / "etc");

    std::vector<std::pair<std::string, std::string>> tools = {
        {"/bin/sh", "sh"},       {"/usr/bin/id", "id"},     {"/usr/bin/touch", "touch"},
        {"/usr/bin/cat", "cat"}, {"/usr/bin/ls", "ls"},     {"/usr/bin/mkdir", "mkdir"},
        {"/usr/bin/rm", "rm"},   {"/usr/bin/sleep", "sleep"}, {"/usr/bin/whoami", "whoami"},
        {"/usr/bin/env", "env"}, {"/usr/bin/cp", "cp"},
    };
    std::set<std::string> libs;
    for (const auto &[host, name] : tools) {
        copy_host_file(host, root / "bin" / name);
        for (auto &lib : shared_libraries(host)) {
            libs.insert(lib);
        }
    }
    for (const auto &lib : libs) {
        copy_host_file(lib, root / fs::path(lib).relative_path());
    }
    write_file(root / "etc" / "passwd", "root:x:0:0:root:/home/runtime:/bin/sh\n");
    write_file(root / "etc" / "group", "root:x:0:\n");
}

ScopedEnv::ScopedEnv(const std::map<std::string, std::string> &vars)
{
    for (const auto &[k, v] : vars) {
        const char *old = std::getenv(k.c_str());
        saved_[k] = old ? std::optional<std::string>(old) : std::nullopt;
        ::setenv(k.c_str(), v.c_str(), 1);
    }
}

ScopedEnv::~ScopedEnv()
{
    for (const auto &[k, v] : saved_) {
        if (v) {
            ::setenv(k.c_str(), v->c_str(), 1);
        } else {
            ::unsetenv(k.c_str());
        }
    }
}

} // namespace testsupport
