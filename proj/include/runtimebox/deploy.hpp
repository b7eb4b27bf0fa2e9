/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Deployment layout under the state root:
//
//   <root>/<name>/<arch>/<version>/rofs        checkout of the commit
//   <root>/<name>/<arch>/<version>/rwfs        overlay upper directory
//   <root>/<name>/<arch>/<version>/tmpfs       overlay work directory
//   <root>/<name>/<arch>/<version>/live        merged view while running
//   <root>/<name>/<arch>/<version>/deployment.state
//   <root>/<name>/<arch>/<version>/deployment.lock
//   <root>/<name>/<arch>/<version>/sandbox.pid "<pid> <starttime>" while running
//
// <version> is the version as requested, so a "latest" deployment keeps
// its directory across updates.

#include "runtimebox/casstore.hpp"
#include "runtimebox/remote.hpp"

#include <sys/types.h>

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace runtimebox {

struct DeploymentState {
    RuntimeRef ref;         // as requested
    RuntimeRef resolved;    // after resolving "latest"
    ObjectId commit;
    std::string remote;     // empty for local refs
    std::int64_t deployed_at{0};

    bool operator==(const DeploymentState &) const = default;
};

std::string serialize_state(const DeploymentState &state);
/// Throws CorruptRepo on malformed input.
DeploymentState parse_state(std::string_view text);

class Deployment {
public:
    Deployment(fs::path base, DeploymentState state)
        : base_(std::move(base))
        , state_(std::move(state))
    {
    }

    const fs::path &base() const { return base_; }
    const DeploymentState &state() const { return state_; }
    const RuntimeRef &ref() const { return state_.ref; }
    const ObjectId &commit() const { return state_.commit; }

    fs::path rofs() const { return base_ / "rofs"; }
    fs::path rwfs() const { return base_ / "rwfs"; }
    fs::path tmpfs() const { return base_ / "tmpfs"; }
    fs::path live() const { return base_ / "live"; }
    fs::path state_file() const { return base_ / "deployment.state"; }
    fs::path lock_file() const { return base_ / "deployment.lock"; }
    fs::path pid_file() const { return base_ / "sandbox.pid"; }

    bool pristine() const;

private:
    fs::path base_;
    DeploymentState state_;
};

fs::path deployment_base(const fs::path &state_root, const RuntimeRef &ref);

/// Throws NotDeployed.
Deployment load_deployment(const fs::path &state_root, const RuntimeRef &ref);

struct DeployOptions {
    /// Remote to use; when unset the only configured remote is used, or
    /// local refs when there is none.
    std::optional<std::string> remote;
    PullOptions pull;
    std::function<std::int64_t()> clock;
};

Deployment deploy(Repo &repo, const fs::path &state_root, const RuntimeRef &ref, const DeployOptions &options = {});
Deployment update(Repo &repo, const fs::path &state_root, const RuntimeRef &ref, const DeployOptions &options = {});
void reset(const fs::path &state_root, const RuntimeRef &ref);
void remove_deployment(const fs::path &state_root, const RuntimeRef &ref);

struct DeploymentInfo {
    RuntimeRef ref;
    ObjectId commit;
    bool pristine{true};
};

std::vector<DeploymentInfo> list_deployments(const fs::path &state_root);

/// Whether rofs still hashes to the commit's tree.
bool verify_rofs(const Repo &repo, const Deployment &deployment);

/// Pid of the sandbox currently running on the deployment. Stale pid files
/// are removed.
std::optional<pid_t> running_sandbox(const Deployment &deployment);

/// Writes "<pid> <starttime>" for the calling process. Throws SandboxRunning
/// when another live process owns the deployment.
void claim_deployment(const Deployment &deployment);
void release_deployment(const Deployment &deployment);

} // namespace runtimebox
