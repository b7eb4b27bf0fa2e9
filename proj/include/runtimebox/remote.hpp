/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Remotes are static file trees with the same layout as a repository:
//
//   <base>/refs/<name>/<arch>/<version>    one 64-hex line
//   <base>/objects/<aa>/<62 hex>.<kind>    file objects hold raw content
//   <base>/refs.index                      one "<name>/<arch>/<version> <hex>" line per ref
//
// refs.index is only consulted to resolve "latest".

#include "runtimebox/casstore.hpp"

#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace runtimebox {

struct RemoteConfig {
    std::string name;
    std::string url;

    bool operator==(const RemoteConfig &) const = default;
};

/// Validates the scheme (http, https, file) and strips trailing slashes.
std::string normalize_remote_url(std::string_view url);

void add_remote(Repo &repo, const std::string &name, const std::string &url);
void remove_remote(Repo &repo, const std::string &name);
std::vector<RemoteConfig> list_remotes(const Repo &repo);
/// Throws UnknownRemote.
RemoteConfig find_remote(const Repo &repo, const std::string &name);

struct FetchResult {
    long status{0};    // 200 or 404; other codes are passed through
    std::string body;
};

/// One GET at a time; pull creates one transport per worker.
class Transport {
public:
    virtual ~Transport() = default;
    /// Throws NetworkError on transport failure.
    virtual FetchResult get(const std::string &url) = 0;
};

using TransportFactory = std::function<std::unique_ptr<Transport>()>;

/// libcurl-backed transport for http, https and file URLs.
std::unique_ptr<Transport> make_curl_transport();

struct PullOptions {
    int workers{4};
    int attempts{3};
    std::chrono::milliseconds backoff_base{500};
    std::function<void(std::chrono::milliseconds)> sleep;
    TransportFactory transport;
};

struct PullStats {
    std::size_t object_requests{0};
    std::size_t objects_admitted{0};
};

/// Fetches the ref and every missing object of its commit's closure, then
/// records the commit under remotes/<remote>/<ref>.
ObjectId pull(Repo &repo, const RemoteConfig &remote, const RuntimeRef &ref, const PullOptions &options = {},
              PullStats *stats = nullptr);

/// Version ordering used for "latest": negative, zero or positive.
int compare_versions(std::string_view a, std::string_view b);

/// Picks the greatest version among candidates, ignoring the literal "latest".
std::optional<std::string> greatest_version(const std::vector<std::string> &versions);

/// Refs advertised by the remote's refs.index.
std::vector<std::pair<RuntimeRef, ObjectId>> list_remote_refs(const RemoteConfig &remote,
                                                              const PullOptions &options = {});

/// "latest" resolves to the greatest advertised version; anything else is
/// returned unchanged.
RuntimeRef resolve_version(const RemoteConfig &remote, const RuntimeRef &ref, const PullOptions &options = {});
/// Same, over the local refs of `repo`.
RuntimeRef resolve_local_version(const Repo &repo, const RuntimeRef &ref);

struct ExportOptions {
    /// Export the tracking refs of this remote instead of local refs.
    std::string remote;
};

/// Writes a servable copy of the exported refs and their closures. Refused
/// with FsckFailed when the repository is not clean.
void export_repo(const Repo &repo, const fs::path &dest, const ExportOptions &options = {});

} // namespace runtimebox
