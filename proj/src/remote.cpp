/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/remote.hpp"

#include "runtimebox/error.hpp"
#include "runtimebox/fsutil.hpp"

#include <curl/curl.h>

#include <algorithm>
#include <cctype>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace runtimebox {

namespace {

constexpr std::string_view latest_version = "latest";

std::vector<std::string> config_lines(const Repo &repo)
{
    std::vector<std::string> lines;
    std::istringstream in(fsutil::read_file(repo.config_path()));
    for (std::string line; std::getline(in, line);) {
        lines.push_back(line);
    }
    return lines;
}

void write_remotes(Repo &repo, const std::vector<RemoteConfig> &remotes)
{
    std::string out(repo_format_line);
    out += '\n';
    for (const auto &r : remotes) {
        out += "remote " + r.name + " " + r.url + "\n";
    }
    fsutil::write_file_atomic(repo.config_path(), out, 0644, repo.root() / "tmp");
}

void check_remote_name(const std::string &name)
{
    if (auto problem = check_ref_component(name)) {
        throw Error(ErrorCode::UsageError, "invalid remote name '" + name + "': " + *problem);
    }
}

std::string object_url(const RemoteConfig &remote, const ObjectRef &ref)
{
    auto hex = ref.id.hex();
    return remote.url + "/objects/" + hex.substr(0, 2) + "/" + hex.substr(2) + "." +
           std::string(object_kind_suffix(ref.kind));
}

std::string ref_url(const RemoteConfig &remote, const RuntimeRef &ref)
{
    return remote.url + "/refs/" + format_runtime_ref(ref);
}

std::once_flag curl_init_once;

class CurlTransport : public Transport {
public:
    CurlTransport()
    {
        std::call_once(curl_init_once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
        handle_ = curl_easy_init();
        if (!handle_) {
            throw Error(ErrorCode::NetworkError, "cannot initialise libcurl");
        }
    }
    ~CurlTransport() override { curl_easy_cleanup(handle_); }

    FetchResult get(const std::string &url) override
    {
        FetchResult result;
        curl_easy_reset(handle_);
        curl_easy_setopt(handle_, CURLOPT_URL, url.c_str());
        curl_easy_setopt(handle_, CURLOPT_FOLLOWLOCATION, 1L);
        curl_easy_setopt(handle_, CURLOPT_NOSIGNAL, 1L);
        curl_easy_setopt(handle_, CURLOPT_CONNECTTIMEOUT, 15L);
        curl_easy_setopt(handle_, CURLOPT_LOW_SPEED_LIMIT, 1L);
        curl_easy_setopt(handle_, CURLOPT_LOW_SPEED_TIME, 30L);
        curl_easy_setopt(handle_, CURLOPT_PROTOCOLS, static_cast<long>(CURLPROTO_HTTP | CURLPROTO_HTTPS | CURLPROTO_FILE));
        curl_easy_setopt(handle_, CURLOPT_WRITEFUNCTION, &CurlTransport::on_data);
        curl_easy_setopt(handle_, CURLOPT_WRITEDATA, &result.body);
        CURLcode rc = curl_easy_perform(handle_);
        if (rc == CURLE_FILE_COULDNT_READ_FILE) {
            return {404, {}};
        }
        if (rc != CURLE_OK) {
            throw Error(ErrorCode::NetworkError, url + ": " + curl_easy_strerror(rc));
        }
        curl_easy_getinfo(handle_, CURLINFO_RESPONSE_CODE, &result.status);
        if (result.status == 0) {
            result.status = 200;    // file:// has no status line
        }
        return result;
    }

private:
    static size_t on_data(char *data, size_t size, size_t count, void *user)
    {
        static_cast<std::string *>(user)->append(data, size * count);
        return size * count;
    }

    CURL *handle_{nullptr};
};

FetchResult fetch(Transport &transport, const std::string &url, const PullOptions &options)
{
    int attempts = std::max(1, options.attempts);
    std::string last;
    for (int attempt = 1; attempt <= attempts; ++attempt) {
        std::optional<FetchResult> r;
        try {
            r = transport.get(url);
        } catch (const Error &e) {
            if (e.code() != ErrorCode::NetworkError) {
                throw;
            }
            last = e.what();
        }
        if (r && r->status < 500 && r->status != 429) {
            if (r->status != 200 && r->status != 404) {
                throw Error(ErrorCode::NetworkError, url + ": HTTP " + std::to_string(r->status));
            }
            return std::move(*r);
        }
        if (r) {
            last = "HTTP " + std::to_string(r->status);
        }
        if (attempt < attempts) {
            auto delay = options.backoff_base * (1 << (attempt - 1));
            if (options.sleep) {
                options.sleep(delay);
            } else {
                std::this_thread::sleep_for(delay);
            }
        }
    }
    throw Error(ErrorCode::NetworkError,
                url + ": giving up after " + std::to_string(attempts) + " attempts (" + last + ")");
}

TransportFactory transport_factory(const PullOptions &options)
{
    return options.transport ? options.transport : TransportFactory(make_curl_transport);
}

struct ClosureItem {
    ObjectRef ref;
    bool executable{false};
};

std::vector<ClosureItem> children_of(const ObjectRef &ref, std::string_view bytes)
{
    std::vector<ClosureItem> out;
    if (ref.kind == ObjectKind::Commit) {
        out.push_back({{deserialize_commit(bytes).tree, ObjectKind::Tree}, false});
    } else if (ref.kind == ObjectKind::Tree) {
        for (const auto &e : deserialize_tree(bytes).entries) {
            if (e.kind == EntryKind::File) {
                out.push_back({{e.id, ObjectKind::File}, e.executable});
            } else if (e.kind == EntryKind::Dir) {
                out.push_back({{e.id, ObjectKind::Tree}, false});
            }
        }
    }
    return out;
}

std::vector<ObjectRef> closure_of(const Repo &repo, const ObjectId &commit)
{
    std::set<ObjectRef> seen{{commit, ObjectKind::Commit}};
    std::vector<ObjectRef> order{{commit, ObjectKind::Commit}};
    for (std::size_t i = 0; i < order.size(); ++i) {
        if (order[i].kind == ObjectKind::File) {
            continue;
        }
        for (const auto &child : children_of(order[i], repo.read_object_bytes(order[i].id, order[i].kind))) {
            if (seen.insert(child.ref).second) {
                order.push_back(child.ref);
            }
        }
    }
    return order;
}

// Split into segments on any of `separators`.
std::vector<std::string_view> segments(std::string_view s, std::string_view separators)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || separators.find(s[i]) != std::string_view::npos) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

bool is_numeric(std::string_view s)
{
    return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int compare_run(std::string_view a, std::string_view b)
{
    bool na = is_numeric(a);
    bool nb = is_numeric(b);
    if (na && nb) {
        a.remove_prefix(std::min(a.find_first_not_of('0'), a.size()));
        b.remove_prefix(std::min(b.find_first_not_of('0'), b.size()));
        if (a.size() != b.size()) {
            return a.size() < b.size() ? -1 : 1;
        }
    } else if (na != nb) {
        return na ? -1 : 1;
    }
    int c = a.compare(b);
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

// Splits a segment into alternating digit and non-digit runs ("rc10" -> "rc", "10").
std::vector<std::string_view> runs(std::string_view s)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= s.size(); ++i) {
        if (i == s.size() || std::isdigit(static_cast<unsigned char>(s[i])) !=
                                 std::isdigit(static_cast<unsigned char>(s[i - 1]))) {
            out.push_back(s.substr(start, i - start));
            start = i;
        }
    }
    return out;
}

int compare_segment(std::string_view a, std::string_view b)
{
    auto ra = runs(a);
    auto rb = runs(b);
    for (std::size_t i = 0; i < std::min(ra.size(), rb.size()); ++i) {
        if (int c = compare_run(ra[i], rb[i])) {
            return c;
        }
    }
    if (ra.size() != rb.size()) {
        return ra.size() < rb.size() ? -1 : 1;
    }
    return 0;
}

int compare_segments(const std::vector<std::string_view> &a, const std::vector<std::string_view> &b)
{
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
        if (int c = compare_segment(a[i], b[i])) {
            return c;
        }
    }
    if (a.size() != b.size()) {
        return a.size() < b.size() ? -1 : 1;
    }
    return 0;
}

std::vector<std::pair<RuntimeRef, ObjectId>> parse_refs_index(const std::string &text)
{
    std::vector<std::pair<RuntimeRef, ObjectId>> out;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        if (line.empty()) {
            continue;
        }
        auto space = line.find(' ');
        std::optional<ObjectId> id;
        if (space != std::string::npos) {
            id = ObjectId::try_from_hex(line.substr(space + 1));
        }
        if (!id) {
            throw Error(ErrorCode::CorruptRepo, "refs.index: malformed line '" + line + "'");
        }
        out.emplace_back(parse_runtime_ref(line.substr(0, space)), *id);
    }
    return out;
}

RuntimeRef pick_latest(const RuntimeRef &ref, const std::vector<std::pair<RuntimeRef, ObjectId>> &refs,
                       const std::string &where)
{
    if (ref.version != latest_version) {
        return ref;
    }
    std::vector<std::string> versions;
    bool literal = false;
    for (const auto &[r, id] : refs) {
        if (r.name == ref.name && r.arch == ref.arch) {
            versions.push_back(r.version);
            literal |= r.version == latest_version;
        }
    }
    if (auto best = greatest_version(versions)) {
        return {ref.name, ref.arch, *best};
    }
    if (literal) {
        return ref;
    }
    throw Error(ErrorCode::RefNotFound, "no versions of " + ref.name + "/" + ref.arch + " " + where);
}

} // namespace

std::string normalize_remote_url(std::string_view url)
{
    std::string u(url);
    while (u.size() > 1 && u.back() == '/') {
        u.pop_back();
    }
    auto bad = [&](const std::string &why) {
        return Error(ErrorCode::MalformedUrl, "'" + std::string(url) + "': " + why);
    };
    if (std::any_of(u.begin(), u.end(), [](unsigned char c) { return c <= ' ' || c == 0x7f; })) {
        throw bad("contains whitespace or control characters");
    }
    std::string_view rest;
    if (u.starts_with("http://") || u.starts_with("https://")) {
        rest = std::string_view(u).substr(u.find("//") + 2);
        if (rest.empty() || rest.front() == '/') {
            throw bad("missing host");
        }
    } else if (u.starts_with("file://")) {
        rest = std::string_view(u).substr(7);
        if (rest.empty() || rest.front() != '/') {
            throw bad("file URLs need an absolute path");
        }
    } else {
        throw bad("scheme must be http, https or file");
    }
    return u;
}

void add_remote(Repo &repo, const std::string &name, const std::string &url)
{
    check_remote_name(name);
    auto normalized = normalize_remote_url(url);
    Repo::WriterScope writer(repo);
    auto remotes = list_remotes(repo);
    for (const auto &r : remotes) {
        if (r.name == name) {
            if (r.url == normalized) {
                return;
            }
            throw Error(ErrorCode::DuplicateRemote,
                        "remote '" + name + "' already points at " + r.url + "; remove it first");
        }
    }
    remotes.push_back({name, normalized});
    write_remotes(repo, remotes);
}

void remove_remote(Repo &repo, const std::string &name)
{
    Repo::WriterScope writer(repo);
    auto remotes = list_remotes(repo);
    auto it = std::find_if(remotes.begin(), remotes.end(), [&](const auto &r) { return r.name == name; });
    if (it == remotes.end()) {
        throw Error(ErrorCode::UnknownRemote, "no remote named '" + name + "'");
    }
    remotes.erase(it);
    write_remotes(repo, remotes);
    fsutil::remove_tree(repo.root() / "remotes" / name);
}

std::vector<RemoteConfig> list_remotes(const Repo &repo)
{
    std::vector<RemoteConfig> out;
    for (const auto &line : config_lines(repo)) {
        std::istringstream in(line);
        std::string word, name, url;
        if (in >> word >> name >> url && word == "remote") {
            out.push_back({name, url});
        }
    }
    std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) { return a.name < b.name; });
    return out;
}

RemoteConfig find_remote(const Repo &repo, const std::string &name)
{
    for (auto &r : list_remotes(repo)) {
        if (r.name == name) {
            return r;
        }
    }
    throw Error(ErrorCode::UnknownRemote, "no remote named '" + name + "'");
}

std::unique_ptr<Transport> make_curl_transport()
{
    return std::make_unique<CurlTransport>();
}

ObjectId pull(Repo &repo, const RemoteConfig &remote, const RuntimeRef &ref, const PullOptions &options,
              PullStats *stats)
{
    auto factory = transport_factory(options);
    auto head = fetch(*factory(), ref_url(remote, ref), options);
    if (head.status == 404) {
        throw Error(ErrorCode::RefNotFound,
                    "ref " + format_runtime_ref(ref) + " not found on remote '" + remote.name + "'");
    }
    auto line = head.body.substr(0, head.body.find_first_of("\r\n"));
    auto commit = ObjectId::try_from_hex(line);
    if (!commit) {
        throw Error(ErrorCode::CorruptRepo, "remote ref " + format_runtime_ref(ref) + " is malformed");
    }

    Repo::WriterScope writer(repo);

    // Objects are admitted bottom-up: a tree or commit enters the store only
    // once everything it references is present, so the store never holds a
    // dangling reference, whatever point a pull stops at. A present tree
    // therefore implies a complete subtree and is not descended into.
    struct Node {
        bool executable{false};
        std::string bytes;
        std::size_t waiting{0};
        std::vector<ObjectRef> parents;
        bool done{false};
    };
    std::mutex mu;
    std::condition_variable cv;
    std::map<ObjectRef, Node> nodes;
    std::deque<ObjectRef> queue;
    int busy = 0;
    std::exception_ptr failure;
    std::atomic<std::size_t> requests{0};
    std::atomic<std::size_t> admitted{0};

    const ObjectRef root{*commit, ObjectKind::Commit};
    if (!repo.has_object(root.id, root.kind)) {
        nodes[root];
        queue.push_back(root);
    }

    // Called with `mu` held once `done_ref` is in the store.
    std::function<void(const ObjectRef &)> completed = [&](const ObjectRef &done_ref) {
        auto &node = nodes[done_ref];
        node.done = true;
        node.bytes.clear();
        for (const auto &p : node.parents) {
            auto &parent = nodes[p];
            if (--parent.waiting == 0) {
                repo.admit_object(p, parent.bytes, false);
                ++admitted;
                completed(p);
            }
        }
    };

    auto worker = [&] {
        std::unique_ptr<Transport> transport;
        std::unique_lock lock(mu);
        for (;;) {
            cv.wait(lock, [&] { return failure || !queue.empty() || busy == 0; });
            if (failure || queue.empty()) {
                return;
            }
            auto item = queue.front();
            queue.pop_front();
            bool executable = nodes[item].executable;
            ++busy;
            lock.unlock();

            std::string body;
            std::vector<ClosureItem> children;
            std::exception_ptr error;
            try {
                if (!transport) {
                    transport = factory();
                }
                ++requests;
                auto r = fetch(*transport, object_url(remote, item), options);
                if (r.status == 404) {
                    throw Error(ErrorCode::IncompleteClosure,
                                "remote '" + remote.name + "' lacks object " + describe(item));
                }
                body = std::move(r.body);
                auto actual = item.kind == ObjectKind::File ? file_object_id(body, executable) : sha256(body);
                if (actual != item.id) {
                    throw Error(ErrorCode::DigestMismatch,
                                "object " + describe(item) + " from remote '" + remote.name +
                                    "' has digest " + actual.hex());
                }
                if (item.kind == ObjectKind::File) {
                    repo.admit_object(item, body, executable);
                    ++admitted;
                } else {
                    children = children_of(item, body);
                }
            } catch (...) {
                error = std::current_exception();
            }

            lock.lock();
            --busy;
            if (error) {
                if (!failure) {
                    failure = error;
                }
                cv.notify_all();
                continue;
            }
            try {
                if (item.kind == ObjectKind::File) {
                    completed(item);
                } else {
                    std::set<ObjectRef> pending;
                    for (const auto &c : children) {
                        auto found = nodes.find(c.ref);
                        if (found != nodes.end() ? found->second.done : repo.has_object(c.ref.id, c.ref.kind)) {
                            continue;
                        }
                        if (!pending.insert(c.ref).second) {
                            continue;
                        }
                        if (found == nodes.end()) {
                            nodes[c.ref].executable = c.executable;
                            queue.push_back(c.ref);
                        }
                        nodes[c.ref].parents.push_back(item);
                    }
                    auto &self = nodes[item];
                    self.waiting = pending.size();
                    self.bytes = std::move(body);
                    if (self.waiting == 0) {
                        repo.admit_object(item, self.bytes, false);
                        ++admitted;
                        completed(item);
                    }
                }
            } catch (...) {
                if (!failure) {
                    failure = std::current_exception();
                }
            }
            cv.notify_all();
        }
    };

    {
        std::vector<std::jthread> threads;
        for (int i = 0; i < std::max(1, options.workers); ++i) {
            threads.emplace_back(worker);
        }
    }
    if (stats) {
        stats->object_requests += requests;
        stats->objects_admitted += admitted;
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
    if (!repo.has_object(root.id, root.kind)) {
        throw Error(ErrorCode::IncompleteClosure, "pull of " + format_runtime_ref(ref) + " did not complete");
    }
    repo.update_ref(ref, *commit, remote.name);
    return *commit;
}

int compare_versions(std::string_view a, std::string_view b)
{
    auto dash_a = a.find('-');
    auto dash_b = b.find('-');
    auto release_a = a.substr(0, dash_a);
    auto release_b = b.substr(0, dash_b);
    if (int c = compare_segments(segments(release_a, "."), segments(release_b, "."))) {
        return c;
    }
    bool pre_a = dash_a != std::string_view::npos;
    bool pre_b = dash_b != std::string_view::npos;
    if (pre_a != pre_b) {
        return pre_a ? -1 : 1;
    }
    if (pre_a) {
        if (int c = compare_segments(segments(a.substr(dash_a + 1), ".-"), segments(b.substr(dash_b + 1), ".-"))) {
            return c;
        }
    }
    int c = a.compare(b);
    return c < 0 ? -1 : (c > 0 ? 1 : 0);
}

std::optional<std::string> greatest_version(const std::vector<std::string> &versions)
{
    std::optional<std::string> best;
    for (const auto &v : versions) {
        if (v != latest_version && (!best || compare_versions(v, *best) > 0)) {
            best = v;
        }
    }
    return best;
}

std::vector<std::pair<RuntimeRef, ObjectId>> list_remote_refs(const RemoteConfig &remote, const PullOptions &options)
{
    auto r = fetch(*transport_factory(options)(), remote.url + "/refs.index", options);
    if (r.status == 404) {
        return {};
    }
    return parse_refs_index(r.body);
}

RuntimeRef resolve_version(const RemoteConfig &remote, const RuntimeRef &ref, const PullOptions &options)
{
    if (ref.version != latest_version) {
        return ref;
    }
    return pick_latest(ref, list_remote_refs(remote, options), "on remote '" + remote.name + "'");
}

RuntimeRef resolve_local_version(const Repo &repo, const RuntimeRef &ref)
{
    return pick_latest(ref, repo.list_refs(), "in the local repository");
}

void export_repo(const Repo &repo, const fs::path &dest, const ExportOptions &options)
{
    auto report = repo.fsck();
    if (!report.clean()) {
        throw Error(ErrorCode::FsckFailed, "refusing to export a damaged repository: " + report.summary());
    }
    if (fs::exists(dest)) {
        if (!fs::is_directory(dest) || (!fsutil::is_empty_dir(dest) && !fs::exists(dest / "refs.index"))) {
            throw Error(ErrorCode::DestNotEmpty, dest.string() + " exists and is not a previous export");
        }
        for (const char *sub : {"objects", "refs", "refs.index"}) {
            fsutil::remove_tree(dest / sub);
        }
    }
    try {
        fs::create_directories(dest / "objects");
        fs::create_directories(dest / "refs");
    } catch (const fs::filesystem_error &e) {
        throw Error(ErrorCode::IoError, e.what());
    }

    auto refs = repo.list_refs(options.remote);
    std::set<ObjectRef> objects;
    for (const auto &[ref, commit] : refs) {
        for (const auto &o : closure_of(repo, commit)) {
            objects.insert(o);
        }
    }
    for (const auto &o : objects) {
        auto hex = o.id.hex();
        auto dir = dest / "objects" / hex.substr(0, 2);
        fs::create_directories(dir);
        fsutil::write_file_atomic(dir / (hex.substr(2) + "." + std::string(object_kind_suffix(o.kind))),
                                  repo.read_object_bytes(o.id, o.kind));
    }
    std::string index;
    for (const auto &[ref, commit] : refs) {
        auto path = dest / "refs" / ref.name / ref.arch / ref.version;
        fs::create_directories(path.parent_path());
        fsutil::write_file_atomic(path, commit.hex() + "\n");
        index += format_runtime_ref(ref) + " " + commit.hex() + "\n";
    }
    fsutil::write_file_atomic(dest / "refs.index", index);
}

} // namespace runtimebox
