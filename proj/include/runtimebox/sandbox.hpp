/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include "runtimebox/deploy.hpp"
#include "runtimebox/refmodel.hpp"

#include <sys/types.h>

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace runtimebox {

namespace fs = std::filesystem;

struct BindMount {
    fs::path host;
    fs::path runtime;
    bool writable{true};

    auto operator<=>(const BindMount &) const = default;
};

/// Parses HOST:RUNTIME or HOST:RUNTIME:ro. Throws MalformedBind.
BindMount parse_bind(std::string_view spec);

struct IdMapping {
    unsigned inside{0};
    unsigned outside{0};
    unsigned count{1};

    auto operator<=>(const IdMapping &) const = default;
};

struct ExecutionPlan {
    /// Direct plans run on `merged` itself without an overlay.
    bool direct{false};
    fs::path lower;
    fs::path upper;
    fs::path work;
    fs::path merged;
    std::string hostname;
    IdMapping uid_map;
    IdMapping gid_map;
    std::vector<BindMount> binds;
    std::map<std::string, std::string> env;
    CommandSpec command;
};

/// Facts about the invoking user that end up in a plan.
struct HostContext {
    fs::path home;
    std::optional<std::string> term;
    uid_t uid{0};
    gid_t gid{0};

    static HostContext current();
};

struct RunOptions {
    std::optional<std::string> command;
    std::vector<BindMount> binds;
    HostContext host = HostContext::current();
};

inline constexpr std::string_view runtime_home = "/home/runtime";
inline constexpr std::string_view runtime_path = "/usr/local/sbin:/usr/local/bin:/usr/sbin:/usr/bin:/sbin:/bin";

/// Last dot-separated segment of the runtime name.
std::string runtime_hostname(const RuntimeRef &ref);

/// Throws SandboxRunning, MalformedBind.
ExecutionPlan build_plan(const Deployment &deployment, const std::optional<Manifest> &manifest,
                         const RunOptions &options);

/// Plan for working directly inside `tree` (runtime authoring). The command
/// is the override or the default shell.
ExecutionPlan build_direct_plan(const fs::path &tree, const std::string &hostname, const RunOptions &options);

/// Reads /manifest.toml as the merged view would show it: rwfs over rofs,
/// honouring whiteouts. Absent file gives nullopt.
std::optional<Manifest> read_deployment_manifest(const Deployment &deployment);

/// read_deployment_manifest followed by build_plan.
ExecutionPlan plan_run(const Deployment &deployment, const RunOptions &options);

std::string serialize_plan(const ExecutionPlan &plan);
std::string plan_to_json(const ExecutionPlan &plan);

/// Throws KernelUnsupported when the running kernel cannot host a sandbox.
void check_kernel_support();

/// Moves the calling process into new user and mount namespaces with the
/// current uid and gid mapped to root. Meant for a dedicated child process.
void enter_user_namespace();

/// Overlay (or, for direct plans, a self bind mount) at plan.merged. Must be
/// created inside a private mount namespace; unmounts on destruction.
class MountGuard {
public:
    explicit MountGuard(const ExecutionPlan &plan);
    ~MountGuard();
    MountGuard(const MountGuard &) = delete;
    MountGuard &operator=(const MountGuard &) = delete;

    const fs::path &merged() const { return merged_; }
    /// Whether the mount came from the userspace helper.
    bool userspace() const { return userspace_; }
    /// Forget the mount (after pivot_root it is no longer reachable by path).
    void dismiss() noexcept { active_ = false; }

private:
    fs::path merged_;
    bool userspace_{false};
    bool active_{false};
};

/// Runs the plan in new user, mount, pid and uts namespaces and returns the
/// command's exit status (128 + signal when it was killed).
int launch(const ExecutionPlan &plan);

/// Full run of a deployment: plan, claim the pid file, launch, release.
int run(const Deployment &deployment, const RunOptions &options);

} // namespace runtimebox
