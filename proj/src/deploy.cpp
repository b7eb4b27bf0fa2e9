/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/deploy.hpp"

#include "runtimebox/error.hpp"
#include "runtimebox/fsutil.hpp"

#include <fcntl.h>
#include <signal.h>
#include <stdio.h>
#include <unistd.h>

#include <algorithm>
#include <ctime>
#include <sstream>

namespace runtimebox {

namespace {

constexpr std::string_view state_env_hint = "HOME (or RUNTIMEBOX_STATE_HOME)";

std::optional<std::string> process_start_time(pid_t pid)
{
    std::string stat;
    try {
        stat = fsutil::read_file("/proc/" + std::to_string(pid) + "/stat");
    } catch (const Error &) {
        return std::nullopt;
    }
    auto close = stat.rfind(')');
    if (close == std::string::npos) {
        return std::nullopt;
    }
    std::istringstream in(stat.substr(close + 1));
    std::string field;
    // Field 22 of /proc/<pid>/stat; the stream starts at field 3.
    for (int i = 3; i <= 22; ++i) {
        if (!(in >> field)) {
            return std::nullopt;
        }
    }
    return field;
}

std::int64_t now(const DeployOptions &options)
{
    return options.clock ? options.clock() : static_cast<std::int64_t>(std::time(nullptr));
}

std::optional<RemoteConfig> select_remote(const Repo &repo, const std::optional<std::string> &requested)
{
    if (requested) {
        return find_remote(repo, *requested);
    }
    auto remotes = list_remotes(repo);
    if (remotes.empty()) {
        return std::nullopt;
    }
    if (remotes.size() == 1) {
        return remotes.front();
    }
    throw Error(ErrorCode::UsageError, "several remotes are configured; choose one with --remote");
}

struct Target {
    RuntimeRef resolved;
    ObjectId commit;
    std::string remote;
};

Target fetch_target(Repo &repo, const RuntimeRef &ref, const std::optional<RemoteConfig> &remote,
                    const PullOptions &pull_options)
{
    if (remote) {
        auto resolved = resolve_version(*remote, ref, pull_options);
        return {resolved, pull(repo, *remote, resolved, pull_options), remote->name};
    }
    auto resolved = resolve_local_version(repo, ref);
    auto commit = repo.read_ref(resolved);
    if (!commit) {
        throw Error(ErrorCode::RefNotFound, "no local ref " + format_runtime_ref(resolved));
    }
    return {resolved, *commit, {}};
}

void checkout_rofs(const Repo &repo, const ObjectId &commit, const fs::path &dest)
{
    try {
        repo.checkout(commit, dest, CheckoutMode::Hardlink);
    } catch (const Error &e) {
        if (e.code() != ErrorCode::CrossDevice) {
            throw;
        }
        repo.checkout(commit, dest, CheckoutMode::Copy);
    }
}

void write_state(const Deployment &d)
{
    fsutil::write_file_atomic(d.state_file(), serialize_state(d.state()));
}

void ensure_not_running(const Deployment &d)
{
    if (auto pid = running_sandbox(d)) {
        throw Error(ErrorCode::SandboxRunning,
                    format_runtime_ref(d.ref()) + " is in use by sandbox process " + std::to_string(*pid));
    }
}

void make_dir(const fs::path &p)
{
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) {
        throw Error(ErrorCode::NotWritable, "cannot create " + p.string() + ": " + ec.message());
    }
}

} // namespace

std::string serialize_state(const DeploymentState &s)
{
    return "ref=" + format_runtime_ref(s.ref) + "\n" + "resolved=" + format_runtime_ref(s.resolved) + "\n" +
           "commit=" + s.commit.hex() + "\n" + "remote=" + s.remote + "\n" +
           "deployed-at=" + std::to_string(s.deployed_at) + "\n";
}

DeploymentState parse_state(std::string_view text)
{
    std::map<std::string, std::string> kv;
    std::istringstream in{std::string(text)};
    for (std::string line; std::getline(in, line);) {
        auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::CorruptRepo, "deployment.state: malformed line '" + line + "'");
        }
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char *key : {"ref", "resolved", "commit", "remote", "deployed-at"}) {
        if (!kv.count(key)) {
            throw Error(ErrorCode::CorruptRepo, std::string("deployment.state: missing ") + key);
        }
    }
    DeploymentState s;
    try {
        s.ref = parse_runtime_ref(kv["ref"]);
        s.resolved = parse_runtime_ref(kv["resolved"]);
        s.deployed_at = std::stoll(kv["deployed-at"]);
    } catch (const std::exception &e) {
        throw Error(ErrorCode::CorruptRepo, std::string("deployment.state: ") + e.what());
    }
    auto id = ObjectId::try_from_hex(kv["commit"]);
    if (!id) {
        throw Error(ErrorCode::CorruptRepo, "deployment.state: bad commit");
    }
    s.commit = *id;
    s.remote = kv["remote"];
    return s;
}

bool Deployment::pristine() const
{
    return !fs::exists(rwfs()) || fsutil::is_empty_dir(rwfs());
}

fs::path deployment_base(const fs::path &state_root, const RuntimeRef &ref)
{
    return state_root / ref.name / ref.arch / ref.version;
}

Deployment load_deployment(const fs::path &state_root, const RuntimeRef &ref)
{
    auto base = deployment_base(state_root, ref);
    if (!fs::exists(base / "deployment.state")) {
        throw Error(ErrorCode::NotDeployed, format_runtime_ref(ref) + " is not deployed");
    }
    return Deployment(base, parse_state(fsutil::read_file(base / "deployment.state")));
}

Deployment deploy(Repo &repo, const fs::path &state_root, const RuntimeRef &ref, const DeployOptions &options)
{
    auto base = deployment_base(state_root, ref);
    bool created = !fs::exists(base);
    make_dir(base);
    try {
        fsutil::FileLock lock(base / "deployment.lock", fsutil::FileLock::Mode::Exclusive);
        auto remote = select_remote(repo, options.remote);
        if (fs::exists(base / "deployment.state")) {
            auto existing = load_deployment(state_root, ref);
            auto target = fetch_target(repo, ref, remote, options.pull);
            if (target.commit == existing.commit()) {
                return existing;
            }
            throw Error(ErrorCode::AlreadyDeployed, format_runtime_ref(ref) + " is deployed at " +
                                                        existing.commit().short_hex() + "; use update to move to " +
                                                        target.commit.short_hex());
        }
        fsutil::require_user_xattrs(base, state_env_hint);
        auto target = fetch_target(repo, ref, remote, options.pull);

        Deployment d(base, {ref, target.resolved, target.commit, target.remote, now(options)});
        // Leftovers of an interrupted deploy carry no state file.
        for (const auto &p : {d.rofs(), d.rwfs(), d.tmpfs(), d.live(), base / "rofs.new"}) {
            fsutil::remove_tree(p);
        }
        checkout_rofs(repo, target.commit, d.rofs());
        for (const auto &p : {d.rwfs(), d.tmpfs(), d.live()}) {
            make_dir(p);
        }
        write_state(d);
        return d;
    } catch (...) {
        if (created) {
            std::error_code ec;
            fsutil::remove_tree(base);
            for (auto p = base.parent_path(); p != state_root && fs::is_empty(p, ec); p = p.parent_path()) {
                fs::remove(p, ec);
            }
        }
        throw;
    }
}

Deployment update(Repo &repo, const fs::path &state_root, const RuntimeRef &ref, const DeployOptions &options)
{
    auto current = load_deployment(state_root, ref);
    fsutil::FileLock lock(current.lock_file(), fsutil::FileLock::Mode::Exclusive);
    current = load_deployment(state_root, ref);
    ensure_not_running(current);

    std::optional<RemoteConfig> remote;
    if (options.remote) {
        remote = find_remote(repo, *options.remote);
    } else if (!current.state().remote.empty()) {
        remote = find_remote(repo, current.state().remote);
    }
    auto target = fetch_target(repo, current.ref(), remote, options.pull);
    if (target.commit == current.commit()) {
        return current;
    }

    auto staged = current.base() / "rofs.new";
    fsutil::remove_tree(staged);
    checkout_rofs(repo, target.commit, staged);
    if (::renameat2(AT_FDCWD, staged.c_str(), AT_FDCWD, current.rofs().c_str(), RENAME_EXCHANGE) != 0) {
        int err = errno;
        fsutil::remove_tree(staged);
        throw_errno(ErrorCode::IoError, "swap " + current.rofs().string(), err);
    }
    fsutil::remove_tree(staged);
    // The work directory may hold state tied to the old lower layer.
    fsutil::clear_directory(current.tmpfs());

    Deployment next(current.base(), {current.ref(), target.resolved, target.commit, target.remote, now(options)});
    write_state(next);
    return next;
}

void reset(const fs::path &state_root, const RuntimeRef &ref)
{
    auto d = load_deployment(state_root, ref);
    fsutil::FileLock lock(d.lock_file(), fsutil::FileLock::Mode::Exclusive);
    ensure_not_running(d);
    fsutil::clear_directory(d.rwfs());
    fsutil::clear_directory(d.tmpfs());
}

void remove_deployment(const fs::path &state_root, const RuntimeRef &ref)
{
    auto d = load_deployment(state_root, ref);
    {
        fsutil::FileLock lock(d.lock_file(), fsutil::FileLock::Mode::Exclusive);
        ensure_not_running(d);
        fsutil::remove_tree(d.base());
    }
    std::error_code ec;
    for (auto p = d.base().parent_path(); p != state_root && fs::is_empty(p, ec); p = p.parent_path()) {
        fs::remove(p, ec);
    }
}

std::vector<DeploymentInfo> list_deployments(const fs::path &state_root)
{
    std::vector<DeploymentInfo> out;
    std::error_code ec;
    if (!fs::is_directory(state_root, ec)) {
        return out;
    }
    auto subdirs = [](const fs::path &p) {
        std::vector<fs::path> dirs;
        std::error_code e;
        for (const auto &entry : fs::directory_iterator(p, e)) {
            if (entry.is_directory() && !entry.is_symlink()) {
                dirs.push_back(entry.path());
            }
        }
        return dirs;
    };
    for (const auto &name : subdirs(state_root)) {
        for (const auto &arch : subdirs(name)) {
            for (const auto &version : subdirs(arch)) {
                if (!fs::exists(version / "deployment.state")) {
                    continue;
                }
                try {
                    Deployment d(version, parse_state(fsutil::read_file(version / "deployment.state")));
                    out.push_back({d.ref(), d.commit(), d.pristine()});
                } catch (const Error &) {
                    continue;
                }
            }
        }
    }
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
        return format_runtime_ref(a.ref) < format_runtime_ref(b.ref);
    });
    return out;
}

bool verify_rofs(const Repo &repo, const Deployment &deployment)
{
    return repo.hash_tree(deployment.rofs()) == repo.read_commit(deployment.commit()).tree;
}

std::optional<pid_t> running_sandbox(const Deployment &deployment)
{
    std::string text;
    try {
        text = fsutil::read_file(deployment.pid_file());
    } catch (const Error &) {
        return std::nullopt;
    }
    std::istringstream in(text);
    long pid = 0;
    std::string start;
    if (in >> pid >> start && pid > 0) {
        auto actual = process_start_time(static_cast<pid_t>(pid));
        if (actual && *actual == start) {
            return static_cast<pid_t>(pid);
        }
    }
    std::error_code ec;
    fs::remove(deployment.pid_file(), ec);
    return std::nullopt;
}

void claim_deployment(const Deployment &deployment)
{
    fsutil::FileLock lock(deployment.lock_file(), fsutil::FileLock::Mode::Exclusive);
    ensure_not_running(deployment);
    auto start = process_start_time(::getpid());
    if (!start) {
        throw Error(ErrorCode::KernelUnsupported, "cannot read /proc/self/stat");
    }
    fsutil::write_file_atomic(deployment.pid_file(), std::to_string(::getpid()) + " " + *start + "\n");
}

void release_deployment(const Deployment &deployment)
{
    std::string text;
    try {
        text = fsutil::read_file(deployment.pid_file());
    } catch (const Error &) {
        return;
    }
    std::istringstream in(text);
    long pid = 0;
    if (in >> pid && pid == ::getpid()) {
        std::error_code ec;
        fs::remove(deployment.pid_file(), ec);
    }
}

} // namespace runtimebox
