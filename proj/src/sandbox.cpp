/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/sandbox.hpp"

#include "runtimebox/error.hpp"
#include "runtimebox/fsutil.hpp"
#include "runtimebox/paths.hpp"

#include <fcntl.h>
#include <linux/openat2.h>
#include <sched.h>
#include <signal.h>
#include <sys/mount.h>
#include <sys/prctl.h>
#include <sys/stat.h>
#include <sys/statvfs.h>
#include <sys/syscall.h>
#include <sys/utsname.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include <algorithm>
#include <cstring>
#include <sstream>

namespace runtimebox {

namespace {

using fsutil::UniqueFd;

constexpr std::string_view plan_format_line = "runtimebox-plan-v1";

std::string escape(std::string_view s)
{
    std::string out;
    for (unsigned char c : s) {
        switch (c) {
        case '\\': out += "\\\\"; break;
        case ' ': out += "\\s"; break;
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        default:
            if (c < 0x20 || c == 0x7f) {
                static const char hex[] = "0123456789abcdef";
                out += "\\x";
                out += hex[c >> 4];
                out += hex[c & 15];
            } else {
                out += static_cast<char>(c);
            }
        }
    }
    return out;
}

std::vector<BindMount> default_binds(const HostContext &host)
{
    return {{host.home / "Public", fs::path(runtime_home) / "Public", true}};
}

std::map<std::string, std::string> plan_env(const HostContext &host)
{
    std::map<std::string, std::string> env{
        {"FAKEROOTDONTTRYCHOWN", "1"},
        {"HOME", std::string(runtime_home)},
        {"USER", "root"},
        {"PATH", std::string(runtime_path)},
    };
    if (host.term) {
        env["TERM"] = *host.term;
    }
    return env;
}

void check_binds(const std::vector<BindMount> &binds)
{
    std::vector<fs::path> targets;
    for (const auto &b : binds) {
        if (!b.host.is_absolute() || !b.runtime.is_absolute()) {
            throw Error(ErrorCode::MalformedBind, "bind paths must be absolute: " + b.host.string() + ":" +
                                                      b.runtime.string());
        }
        for (const auto &part : b.runtime) {
            if (part == "..") {
                throw Error(ErrorCode::MalformedBind, "bind target may not contain '..': " + b.runtime.string());
            }
        }
        auto norm = b.runtime.lexically_normal();
        if (norm == "/") {
            throw Error(ErrorCode::MalformedBind, "cannot bind over the runtime root");
        }
        if (std::find(targets.begin(), targets.end(), norm) != targets.end()) {
            throw Error(ErrorCode::MalformedBind, "two binds target " + norm.string());
        }
        targets.push_back(norm);
    }
}

// ---- code shared by the processes of a launch ------------------------------

volatile sig_atomic_t forward_to = 0;

void forward_signal(int sig)
{
    if (forward_to > 0) {
        ::kill(static_cast<pid_t>(forward_to), sig);
    }
}

void install_forwarding(pid_t target, bool ignore_interactive, struct sigaction *saved = nullptr)
{
    forward_to = target;
    struct sigaction sa {};
    sa.sa_handler = forward_signal;
    sigemptyset(&sa.sa_mask);
    sa.sa_flags = SA_RESTART;
    int i = 0;
    for (int sig : {SIGTERM, SIGHUP}) {
        ::sigaction(sig, &sa, saved ? &saved[i] : nullptr);
        ++i;
    }
    if (ignore_interactive) {
        struct sigaction ign {};
        ign.sa_handler = SIG_IGN;
        sigemptyset(&ign.sa_mask);
        for (int sig : {SIGINT, SIGQUIT}) {
            ::sigaction(sig, &ign, saved ? &saved[i] : nullptr);
            ++i;
        }
    }
}

void restore_signals(const struct sigaction *saved)
{
    int i = 0;
    for (int sig : {SIGTERM, SIGHUP, SIGINT, SIGQUIT}) {
        ::sigaction(sig, &saved[i++], nullptr);
    }
    forward_to = 0;
}

void report(int fd, char tag, const std::string &text)
{
    std::string line = std::string(1, tag) + " " + text;
    std::replace(line.begin(), line.end(), '\n', ' ');
    line += '\n';
    // The pipe is large enough for every message a launch produces.
    [[maybe_unused]] auto n = ::write(fd, line.data(), line.size());
}

[[noreturn]] void fail_child(int fd, ErrorCode code, const std::string &message, int status = 125)
{
    report(fd, 'E', std::to_string(static_cast<int>(code)) + " " + message);
    ::_exit(status);
}

int wait_status(pid_t pid)
{
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) {
            return 125;
        }
    }
    if (WIFEXITED(status)) {
        return WEXITSTATUS(status);
    }
    return 128 + WTERMSIG(status);
}

void write_proc(const char *path, const std::string &text)
{
    UniqueFd fd(::open(path, O_WRONLY | O_CLOEXEC));
    if (!fd || ::write(fd.get(), text.data(), text.size()) != static_cast<ssize_t>(text.size())) {
        throw_errno(ErrorCode::KernelUnsupported, std::string("write ") + path, errno);
    }
}

void enter_namespaces(int flags)
{
    uid_t uid = ::geteuid();
    gid_t gid = ::getegid();
    if (::unshare(CLONE_NEWUSER | flags) != 0) {
        int err = errno;
        throw Error(ErrorCode::KernelUnsupported,
                    std::string("cannot create user namespace: ") + std::strerror(err) +
                        " (unprivileged user namespaces may be disabled; check "
                        "/proc/sys/user/max_user_namespaces)");
    }
    std::error_code ec;
    if (fs::exists("/proc/self/setgroups", ec)) {
        write_proc("/proc/self/setgroups", "deny");
    }
    write_proc("/proc/self/uid_map", "0 " + std::to_string(uid) + " 1");
    write_proc("/proc/self/gid_map", "0 " + std::to_string(gid) + " 1");
    if (flags & CLONE_NEWNS) {
        if (::mount(nullptr, "/", nullptr, MS_REC | MS_PRIVATE, nullptr) != 0) {
            throw_errno(ErrorCode::MountFailed, "make mounts private", errno);
        }
    }
}

std::string fd_path(int fd)
{
    return "/proc/self/fd/" + std::to_string(fd);
}

UniqueFd open_in_root(int root, const fs::path &rel, std::uint64_t flags)
{
    open_how how{};
    how.flags = flags | O_CLOEXEC;
    how.resolve = RESOLVE_IN_ROOT | RESOLVE_NO_MAGICLINKS;
    auto path = rel.empty() ? std::string(".") : rel.string();
    long fd = ::syscall(SYS_openat2, root, path.c_str(), &how, sizeof how);
    return UniqueFd(static_cast<int>(fd));
}

// Opens runtime path `rel` below `root`, creating missing components.
// Newly created paths are reported so they can be removed after the run.
UniqueFd ensure_path(int root, const fs::path &rel, bool as_file, int report_fd)
{
    fs::path cur;
    std::vector<fs::path> parts(rel.begin(), rel.end());
    for (std::size_t i = 0; i < parts.size(); ++i) {
        auto next = cur / parts[i];
        bool last = i + 1 == parts.size();
        auto fd = open_in_root(root, next, O_PATH | ((last && as_file) ? 0 : O_DIRECTORY));
        if (!fd) {
            if (errno != ENOENT) {
                throw_errno(ErrorCode::MountFailed, "open /" + next.string(), errno);
            }
            auto parent = open_in_root(root, cur, O_PATH | O_DIRECTORY);
            if (!parent) {
                throw_errno(ErrorCode::MountFailed, "open /" + cur.string(), errno);
            }
            int rc;
            if (last && as_file) {
                rc = ::mknodat(parent.get(), parts[i].c_str(), S_IFREG | 0644, 0);
            } else {
                rc = ::mkdirat(parent.get(), parts[i].c_str(), 0755);
            }
            if (rc != 0 && errno != EEXIST) {
                throw_errno(ErrorCode::MountFailed, "create /" + next.string(), errno);
            }
            if (rc == 0 && report_fd >= 0) {
                report(report_fd, 'M', escape(next.string()));
            }
        }
        cur = next;
    }
    auto fd = open_in_root(root, rel, O_PATH | (as_file ? 0 : O_DIRECTORY));
    if (!fd) {
        throw_errno(ErrorCode::MountFailed, "open /" + rel.string(), errno);
    }
    return fd;
}

unsigned long locked_flags(const char *path)
{
    struct statvfs sv {};
    if (::statvfs(path, &sv) != 0) {
        return 0;
    }
    unsigned long f = 0;
    if (sv.f_flag & ST_NOSUID) f |= MS_NOSUID;
    if (sv.f_flag & ST_NODEV) f |= MS_NODEV;
    if (sv.f_flag & ST_NOEXEC) f |= MS_NOEXEC;
    if (sv.f_flag & ST_NOATIME) f |= MS_NOATIME;
    if (sv.f_flag & ST_NODIRATIME) f |= MS_NODIRATIME;
    if (sv.f_flag & ST_RELATIME) f |= MS_RELATIME;
    return f;
}

void bind_mount(int root, const BindMount &b, bool is_dir, int report_fd)
{
    auto rel = b.runtime.relative_path();
    {
        auto target = ensure_path(root, rel, !is_dir, report_fd);
        if (::mount(b.host.c_str(), fd_path(target.get()).c_str(), nullptr, MS_BIND | MS_REC, nullptr) != 0) {
            throw_errno(ErrorCode::MountFailed, "bind " + b.host.string() + " on " + b.runtime.string(), errno);
        }
    }
    if (!b.writable) {
        // Reopen so the remount applies to the new mount, not the one below it.
        auto target = open_in_root(root, rel, O_PATH | (is_dir ? O_DIRECTORY : 0));
        auto flags = MS_BIND | MS_REMOUNT | MS_RDONLY | locked_flags(b.host.c_str());
        if (!target || ::mount(nullptr, fd_path(target.get()).c_str(), nullptr, flags, nullptr) != 0) {
            throw_errno(ErrorCode::MountFailed, "make " + b.runtime.string() + " read-only", errno);
        }
    }
}

void setup_dev(int root, int report_fd)
{
    {
        auto dev = ensure_path(root, "dev", false, report_fd);
        if (::mount("tmpfs", fd_path(dev.get()).c_str(), "tmpfs", MS_NOSUID | MS_NOEXEC, "mode=0755") != 0) {
            throw_errno(ErrorCode::MountFailed, "mount /dev", errno);
        }
    }
    auto dev = open_in_root(root, "dev", O_PATH | O_DIRECTORY);
    for (const char *node : {"null", "zero", "full", "random", "urandom", "tty"}) {
        auto host = fs::path("/dev") / node;
        struct stat st {};
        if (::stat(host.c_str(), &st) != 0) {
            continue;
        }
        if (::mknodat(dev.get(), node, S_IFREG | 0666, 0) != 0) {
            throw_errno(ErrorCode::MountFailed, std::string("create /dev/") + node, errno);
        }
        auto target = open_in_root(root, fs::path("dev") / node, O_PATH);
        if (::mount(host.c_str(), fd_path(target.get()).c_str(), nullptr, MS_BIND, nullptr) != 0 &&
            std::strcmp(node, "tty") != 0) {
            throw_errno(ErrorCode::MountFailed, std::string("bind /dev/") + node, errno);
        }
    }
    for (auto [target, name] : {std::pair{"/proc/self/fd", "fd"}, std::pair{"/proc/self/fd/0", "stdin"},
                                std::pair{"/proc/self/fd/1", "stdout"}, std::pair{"/proc/self/fd/2", "stderr"}}) {
        if (::symlinkat(target, dev.get(), name) != 0) {
            throw_errno(ErrorCode::MountFailed, std::string("create /dev/") + name, errno);
        }
    }
    ::mkdirat(dev.get(), "shm", 01777);
    if (::mkdirat(dev.get(), "pts", 0755) == 0) {
        auto pts = open_in_root(root, "dev/pts", O_PATH | O_DIRECTORY);
        if (::mount("devpts", fd_path(pts.get()).c_str(), "devpts", MS_NOSUID | MS_NOEXEC,
                    "newinstance,ptmxmode=0666,mode=620") == 0) {
            if (::symlinkat("pts/ptmx", dev.get(), "ptmx") != 0) {
                throw_errno(ErrorCode::MountFailed, "create /dev/ptmx", errno);
            }
        }
    }
}

std::optional<fs::path> find_in_path(const std::string &program)
{
    std::istringstream in(fsutil::env_or("PATH", "/usr/local/bin:/usr/bin:/bin"));
    for (std::string dir; std::getline(in, dir, ':');) {
        auto candidate = fs::path(dir) / program;
        if (!dir.empty() && ::access(candidate.c_str(), X_OK) == 0) {
            return candidate;
        }
    }
    return std::nullopt;
}

// Process A: pid 1 of the new pid namespace.
[[noreturn]] void run_reaper(const ExecutionPlan &plan, int report_fd)
{
    ::prctl(PR_SET_PDEATHSIG, SIGKILL);
    pid_t payload = -1;
    try {
        MountGuard guard(plan);
        UniqueFd root(::open(plan.merged.c_str(), O_PATH | O_DIRECTORY | O_CLOEXEC));
        if (!root) {
            throw_errno(ErrorCode::MountFailed, "open " + plan.merged.string(), errno);
        }
        {
            auto proc = ensure_path(root.get(), "proc", false, report_fd);
            if (::mount("proc", fd_path(proc.get()).c_str(), "proc", MS_NOSUID | MS_NODEV | MS_NOEXEC, nullptr) != 0) {
                throw_errno(ErrorCode::MountFailed, "mount /proc", errno);
            }
        }
        setup_dev(root.get(), report_fd);
        {
            auto tmp = ensure_path(root.get(), "tmp", false, report_fd);
            if (::mount("tmpfs", fd_path(tmp.get()).c_str(), "tmpfs", MS_NOSUID | MS_NODEV, "mode=1777") != 0) {
                throw_errno(ErrorCode::MountFailed, "mount /tmp", errno);
            }
        }
        for (const auto &b : plan.binds) {
            struct stat st {};
            if (::stat(b.host.c_str(), &st) != 0) {
                throw_errno(ErrorCode::MountFailed, "bind source " + b.host.string(), errno);
            }
            bind_mount(root.get(), b, S_ISDIR(st.st_mode), report_fd);
        }
        if (::sethostname(plan.hostname.data(), plan.hostname.size()) != 0) {
            throw_errno(ErrorCode::LaunchFailed, "sethostname", errno);
        }
        if (::chdir(plan.merged.c_str()) != 0 || ::syscall(SYS_pivot_root, ".", ".") != 0 ||
            ::umount2(".", MNT_DETACH) != 0 || ::chdir("/") != 0) {
            throw_errno(ErrorCode::MountFailed, "pivot_root into " + plan.merged.string(), errno);
        }
        guard.dismiss();

        std::vector<std::string> env_strings;
        for (const auto &[k, v] : plan.env) {
            env_strings.push_back(k + "=" + v);
        }
        payload = ::fork();
        if (payload < 0) {
            throw_errno(ErrorCode::LaunchFailed, "fork", errno);
        }
        if (payload == 0) {
            struct sigaction dfl {};
            dfl.sa_handler = SIG_DFL;
            sigemptyset(&dfl.sa_mask);
            for (int sig : {SIGTERM, SIGHUP, SIGINT, SIGQUIT}) {
                ::sigaction(sig, &dfl, nullptr);
            }
            ::clearenv();
            for (const auto &[k, v] : plan.env) {
                ::setenv(k.c_str(), v.c_str(), 1);
            }
            auto home = plan.env.count("HOME") ? plan.env.at("HOME") : std::string("/");
            if (::chdir(home.c_str()) != 0) {
                [[maybe_unused]] int rc = ::chdir("/");
            }
            std::vector<char *> argv;
            for (const auto &a : plan.command.argv) {
                argv.push_back(const_cast<char *>(a.c_str()));
            }
            argv.push_back(nullptr);
            ::execvp(argv[0], argv.data());
            int err = errno;
            fail_child(report_fd, ErrorCode::LaunchFailed,
                       "cannot execute " + plan.command.argv[0] + " inside the runtime: " + std::strerror(err), 127);
        }
    } catch (const Error &e) {
        fail_child(report_fd, e.code(), e.what());
    } catch (const std::exception &e) {
        fail_child(report_fd, ErrorCode::LaunchFailed, e.what());
    }

    install_forwarding(payload, false);
    int result = 125;
    for (;;) {
        int status = 0;
        pid_t pid = ::waitpid(-1, &status, 0);
        if (pid < 0) {
            if (errno == EINTR) {
                continue;
            }
            break;
        }
        if (pid == payload) {
            result = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
        }
    }
    ::_exit(result);
}

// Process X: owns the new user namespace and waits for the reaper.
[[noreturn]] void run_namespace_owner(const ExecutionPlan &plan, int report_fd, pid_t launcher)
{
    ::prctl(PR_SET_PDEATHSIG, SIGKILL);
    if (::getppid() != launcher) {
        ::_exit(125);
    }
    try {
        enter_namespaces(CLONE_NEWNS | CLONE_NEWUTS | CLONE_NEWPID);
    } catch (const Error &e) {
        fail_child(report_fd, e.code(), e.what());
    }
    pid_t reaper = ::fork();
    if (reaper < 0) {
        fail_child(report_fd, ErrorCode::LaunchFailed, std::string("fork: ") + std::strerror(errno));
    }
    if (reaper == 0) {
        run_reaper(plan, report_fd);
    }
    install_forwarding(reaper, true);
    ::_exit(wait_status(reaper));
}

} // namespace

BindMount parse_bind(std::string_view spec)
{
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= spec.size(); ++i) {
        if (i == spec.size() || spec[i] == ':') {
            parts.emplace_back(spec.substr(start, i - start));
            start = i + 1;
        }
    }
    bool writable = true;
    if (parts.size() == 3 && (parts[2] == "ro" || parts[2] == "rw")) {
        writable = parts[2] == "rw";
        parts.pop_back();
    }
    if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
        throw Error(ErrorCode::MalformedBind, "expected HOST:RUNTIME[:ro], got '" + std::string(spec) + "'");
    }
    BindMount b{parts[0], parts[1], writable};
    check_binds({b});
    return b;
}

HostContext HostContext::current()
{
    HostContext h;
    h.home = home_directory();
    if (const char *term = std::getenv("TERM"); term && *term) {
        h.term = term;
    }
    h.uid = ::getuid();
    h.gid = ::getgid();
    return h;
}

std::string runtime_hostname(const RuntimeRef &ref)
{
    auto dot = ref.name.rfind('.');
    auto last = dot == std::string::npos ? ref.name : ref.name.substr(dot + 1);
    return last.empty() ? std::string("runtime") : last;
}

ExecutionPlan build_plan(const Deployment &deployment, const std::optional<Manifest> &manifest,
                         const RunOptions &options)
{
    if (auto pid = running_sandbox(deployment)) {
        throw Error(ErrorCode::SandboxRunning, format_runtime_ref(deployment.ref()) +
                                                   " is in use by sandbox process " + std::to_string(*pid));
    }
    ExecutionPlan plan;
    plan.lower = deployment.rofs();
    plan.upper = deployment.rwfs();
    plan.work = deployment.tmpfs();
    plan.merged = deployment.live();
    plan.hostname = runtime_hostname(deployment.ref());
    plan.uid_map = {0, static_cast<unsigned>(options.host.uid), 1};
    plan.gid_map = {0, static_cast<unsigned>(options.host.gid), 1};
    plan.binds = default_binds(options.host);
    plan.binds.insert(plan.binds.end(), options.binds.begin(), options.binds.end());
    check_binds(plan.binds);
    plan.env = plan_env(options.host);
    plan.command = resolve_command(manifest, options.command);
    return plan;
}

ExecutionPlan build_direct_plan(const fs::path &tree, const std::string &hostname, const RunOptions &options)
{
    ExecutionPlan plan;
    plan.direct = true;
    plan.merged = tree;
    plan.hostname = hostname;
    plan.uid_map = {0, static_cast<unsigned>(options.host.uid), 1};
    plan.gid_map = {0, static_cast<unsigned>(options.host.gid), 1};
    plan.binds = default_binds(options.host);
    plan.binds.insert(plan.binds.end(), options.binds.begin(), options.binds.end());
    check_binds(plan.binds);
    plan.env = plan_env(options.host);
    plan.command = resolve_command(std::nullopt, options.command);
    return plan;
}

std::optional<Manifest> read_deployment_manifest(const Deployment &deployment)
{
    struct stat st {};
    auto upper = deployment.rwfs() / "manifest.toml";
    if (::lstat(upper.c_str(), &st) == 0) {
        // A 0/0 character device is an overlay whiteout: deleted in the merged view.
        if (S_ISREG(st.st_mode)) {
            return parse_manifest(fsutil::read_file(upper));
        }
        return std::nullopt;
    }
    auto lower = deployment.rofs() / "manifest.toml";
    if (::lstat(lower.c_str(), &st) == 0 && S_ISREG(st.st_mode)) {
        return parse_manifest(fsutil::read_file(lower));
    }
    return std::nullopt;
}

ExecutionPlan plan_run(const Deployment &deployment, const RunOptions &options)
{
    std::optional<Manifest> manifest;
    try {
        manifest = read_deployment_manifest(deployment);
    } catch (const Error &) {
        // An override makes the manifest irrelevant, so a broken one is no obstacle.
        if (!options.command) {
            throw;
        }
    }
    return build_plan(deployment, manifest, options);
}

std::string serialize_plan(const ExecutionPlan &plan)
{
    std::string out(plan_format_line);
    out += '\n';
    auto line = [&](std::string_view key, const std::string &value) {
        out += key;
        out += ' ';
        out += value;
        out += '\n';
    };
    line("mode", plan.direct ? "direct" : "overlay");
    if (!plan.direct) {
        line("lower", escape(plan.lower.string()));
        line("upper", escape(plan.upper.string()));
        line("work", escape(plan.work.string()));
    }
    line("merged", escape(plan.merged.string()));
    line("hostname", escape(plan.hostname));
    auto map = [](const IdMapping &m) {
        return std::to_string(m.inside) + " " + std::to_string(m.outside) + " " + std::to_string(m.count);
    };
    line("uid-map", map(plan.uid_map));
    line("gid-map", map(plan.gid_map));
    for (const auto &b : plan.binds) {
        line("bind", std::string(b.writable ? "rw " : "ro ") + escape(b.host.string()) + " " +
                         escape(b.runtime.string()));
    }
    for (const auto &[k, v] : plan.env) {
        line("env", escape(k + "=" + v));
    }
    line("argv-source", std::string(command_source_name(plan.command.source)));
    for (const auto &a : plan.command.argv) {
        line("argv", escape(a));
    }
    return out;
}

std::string plan_to_json(const ExecutionPlan &plan)
{
    nlohmann::ordered_json j;
    j["format"] = plan_format_line;
    j["mode"] = plan.direct ? "direct" : "overlay";
    if (!plan.direct) {
        j["lower"] = plan.lower.string();
        j["upper"] = plan.upper.string();
        j["work"] = plan.work.string();
    }
    j["merged"] = plan.merged.string();
    j["hostname"] = plan.hostname;
    auto map = [](const IdMapping &m) {
        return nlohmann::ordered_json{{"inside", m.inside}, {"outside", m.outside}, {"count", m.count}};
    };
    j["uid_map"] = map(plan.uid_map);
    j["gid_map"] = map(plan.gid_map);
    j["binds"] = nlohmann::ordered_json::array();
    for (const auto &b : plan.binds) {
        j["binds"].push_back({{"host", b.host.string()}, {"runtime", b.runtime.string()}, {"writable", b.writable}});
    }
    j["env"] = nlohmann::ordered_json::object();
    for (const auto &[k, v] : plan.env) {
        j["env"][k] = v;
    }
    j["command"] = {{"source", command_source_name(plan.command.source)}, {"argv", plan.command.argv}};
    return j.dump(2) + "\n";
}

void check_kernel_support()
{
    struct utsname u {};
    if (::uname(&u) != 0 || std::string_view(u.sysname) != "Linux") {
        throw Error(ErrorCode::KernelUnsupported,
                    "sandboxes need a Linux kernel 5.11 or newer; on macOS use lima, on Windows use WSL2");
    }
    int major = 0;
    int minor = 0;
    std::sscanf(u.release, "%d.%d", &major, &minor);
    if (major < 5 || (major == 5 && minor < 11)) {
        throw Error(ErrorCode::KernelUnsupported, std::string("kernel ") + u.release +
                                                      " found, 5.11 or newer required for unprivileged overlay "
                                                      "mounts");
    }
    std::error_code ec;
    if (!fs::exists("/proc/self/ns/user", ec)) {
        throw Error(ErrorCode::KernelUnsupported, "kernel " + std::string(u.release) +
                                                      " was built without user namespace support");
    }
}

void enter_user_namespace()
{
    enter_namespaces(CLONE_NEWNS);
}

MountGuard::MountGuard(const ExecutionPlan &plan)
    : merged_(plan.merged)
{
    if (plan.direct) {
        if (::mount(merged_.c_str(), merged_.c_str(), nullptr, MS_BIND | MS_REC, nullptr) != 0) {
            throw_errno(ErrorCode::MountFailed, "bind " + merged_.string() + " onto itself", errno);
        }
        active_ = true;
        return;
    }
    for (const auto &p : {plan.lower, plan.upper, plan.work}) {
        if (p.string().find_first_of(",:") != std::string::npos) {
            throw Error(ErrorCode::MountFailed, "overlay layer path may not contain ',' or ':': " + p.string());
        }
    }
    auto base = "lowerdir=" + plan.lower.string() + ",upperdir=" + plan.upper.string() +
                ",workdir=" + plan.work.string();
    int err = 0;
    for (const auto &opts : {base + ",userxattr", base}) {
        if (::mount("overlay", merged_.c_str(), "overlay", 0, opts.c_str()) == 0) {
            active_ = true;
            return;
        }
        err = errno;
    }
    if (auto helper = find_in_path("fuse-overlayfs")) {
        pid_t pid = ::fork();
        if (pid == 0) {
            ::execl(helper->c_str(), "fuse-overlayfs", "-o", base.c_str(), merged_.c_str(), nullptr);
            ::_exit(127);
        }
        if (pid > 0 && wait_status(pid) == 0) {
            active_ = true;
            userspace_ = true;
            return;
        }
    }
    throw Error(ErrorCode::MountFailed, "overlay mount on " + merged_.string() + " failed: " + std::strerror(err) +
                                            " (and no working fuse-overlayfs was found)");
}

MountGuard::~MountGuard()
{
    if (active_) {
        ::umount2(merged_.c_str(), MNT_DETACH);
    }
}

int launch(const ExecutionPlan &plan)
{
    check_kernel_support();
    if (plan.command.argv.empty() || plan.command.argv[0].empty()) {
        throw Error(ErrorCode::EmptyCommand, "nothing to execute");
    }
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) {
        throw_errno(ErrorCode::LaunchFailed, "pipe", errno);
    }
    UniqueFd read_end(fds[0]);
    UniqueFd write_end(fds[1]);

    pid_t self = ::getpid();
    pid_t owner = ::fork();
    if (owner < 0) {
        throw_errno(ErrorCode::LaunchFailed, "fork", errno);
    }
    if (owner == 0) {
        read_end.reset();
        run_namespace_owner(plan, write_end.get(), self);
    }
    write_end.reset();

    struct sigaction saved[4];
    install_forwarding(owner, true, saved);
    int status = wait_status(owner);
    restore_signals(saved);

    std::string messages;
    char buf[4096];
    for (;;) {
        auto n = ::read(read_end.get(), buf, sizeof buf);
        if (n < 0 && errno == EINTR) {
            continue;
        }
        if (n <= 0) {
            break;
        }
        messages.append(buf, static_cast<std::size_t>(n));
    }

    std::optional<Error> failure;
    std::vector<std::string> created;
    std::istringstream in(messages);
    for (std::string line; std::getline(in, line);) {
        if (line.starts_with("M ")) {
            created.push_back(line.substr(2));
        } else if (line.starts_with("E ") && !failure) {
            std::istringstream fields(line.substr(2));
            int code = 0;
            fields >> code;
            std::string text;
            std::getline(fields >> std::ws, text);
            failure.emplace(static_cast<ErrorCode>(code), text);
        }
    }

    // Mountpoints made for this run live in the upper layer (or the tree);
    // remove them again when nothing else was put there.
    auto layer = plan.direct ? plan.merged : plan.upper;
    for (auto it = created.rbegin(); it != created.rend(); ++it) {
        std::string rel;
        for (std::size_t i = 0; i < it->size(); ++i) {
            if ((*it)[i] == '\\' && i + 1 < it->size()) {
                char c = (*it)[++i];
                rel += c == 's' ? ' ' : c == 'n' ? '\n' : c == 't' ? '\t' : c;
            } else {
                rel += (*it)[i];
            }
        }
        auto p = layer / rel;
        std::error_code ec;
        auto st = fs::symlink_status(p, ec);
        if ((fs::is_directory(st) && fs::is_empty(p, ec)) || (fs::is_regular_file(st) && fs::file_size(p, ec) == 0)) {
            fs::remove(p, ec);
        }
    }

    if (failure) {
        throw *failure;
    }
    return status;
}

int run(const Deployment &deployment, const RunOptions &options)
{
    check_kernel_support();
    auto plan = plan_run(deployment, options);
    std::error_code ec;
    fs::create_directories(options.host.home / "Public", ec);
    claim_deployment(deployment);
    int status;
    try {
        status = launch(plan);
    } catch (...) {
        release_deployment(deployment);
        throw;
    }
    release_deployment(deployment);
    return status;
}

} // namespace runtimebox
