/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/casstore.hpp"

#include "runtimebox/error.hpp"

#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <mutex>
#include <set>
#include <sstream>

namespace runtimebox {

using fsutil::UniqueFd;

struct Repo::Shared {
    std::mutex mu;
    int writer_depth{0};
    std::optional<fsutil::FileLock> writer_lock;
};

std::string describe(const ObjectRef &ref)
{
    return ref.id.hex() + "." + std::string(object_kind_suffix(ref.kind));
}

std::string FsckReport::summary() const
{
    std::ostringstream os;
    os << objects_scanned << " objects scanned, " << digest_mismatches.size()
       << " digest mismatches, " << dangling.size() << " dangling references";
    for (const auto &m : digest_mismatches) {
        os << "\n  digest mismatch: " << describe(m);
    }
    for (const auto &d : dangling) {
        os << "\n  dangling: " << d.from << " -> " << describe(d.missing);
    }
    return os.str();
}

namespace {

constexpr std::size_t copy_chunk = 1 << 16;

ErrorCode write_error(int err)
{
    return err == EACCES || err == EPERM || err == EROFS ? ErrorCode::NotWritable
                                                         : ErrorCode::IoError;
}

void make_dir(const fs::path &p)
{
    if (::mkdir(p.c_str(), 0755) != 0 && errno != EEXIST) {
        throw_errno(write_error(errno), "mkdir " + p.string(), errno);
    }
}

bool is_executable(const struct stat &st)
{
    return (st.st_mode & S_IXUSR) != 0;
}

struct StatEntry {
    std::string name;
    struct stat st{};
};

std::vector<StatEntry> sorted_entries(const fs::path &dir)
{
    std::vector<StatEntry> out;
    std::error_code ec;
    for (fs::directory_iterator it(dir, ec), end; !ec && it != end; it.increment(ec)) {
        StatEntry entry;
        entry.name = it->path().filename().native();
        if (::lstat(it->path().c_str(), &entry.st) != 0) {
            throw_errno(ErrorCode::IoError, "lstat " + it->path().string(), errno);
        }
        out.push_back(std::move(entry));
    }
    if (ec) {
        throw Error(ErrorCode::IoError, "read directory " + dir.string() + ": " + ec.message());
    }
    std::sort(out.begin(), out.end(),
              [](const StatEntry &a, const StatEntry &b) { return a.name < b.name; });
    return out;
}

std::string read_link(const fs::path &p)
{
    std::string buf(256, '\0');
    for (;;) {
        auto n = ::readlink(p.c_str(), buf.data(), buf.size());
        if (n < 0) {
            throw_errno(ErrorCode::IoError, "readlink " + p.string(), errno);
        }
        if (static_cast<std::size_t>(n) < buf.size()) {
            buf.resize(static_cast<std::size_t>(n));
            return buf;
        }
        buf.resize(buf.size() * 2);
    }
}

[[noreturn]] void unsupported_entry(const fs::path &p, const struct stat &st)
{
    const char *what = S_ISCHR(st.st_mode)    ? "character device"
                       : S_ISBLK(st.st_mode)  ? "block device"
                       : S_ISFIFO(st.st_mode) ? "fifo"
                       : S_ISSOCK(st.st_mode) ? "socket"
                                              : "special file";
    throw Error(ErrorCode::UnsupportedEntry, "cannot snapshot " + std::string(what) + " " + p.string());
}

/// Streams `source` through the file-object hash, optionally copying it to
/// `copy_fd`.
ObjectId hash_file(const fs::path &source, bool executable, int copy_fd)
{
    UniqueFd in(::open(source.c_str(), O_RDONLY | O_CLOEXEC | O_NOFOLLOW));
    if (!in) {
        throw_errno(ErrorCode::IoError, "open " + source.string(), errno);
    }
    struct stat st{};
    if (::fstat(in.get(), &st) != 0) {
        throw_errno(ErrorCode::IoError, "fstat " + source.string(), errno);
    }
    Sha256 h;
    h.update(file_object_header(executable, static_cast<std::uint64_t>(st.st_size)));
    std::vector<char> buf(copy_chunk);
    std::uint64_t total = 0;
    for (;;) {
        auto n = ::read(in.get(), buf.data(), buf.size());
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno(ErrorCode::IoError, "read " + source.string(), errno);
        }
        if (n == 0) {
            break;
        }
        std::string_view chunk(buf.data(), static_cast<std::size_t>(n));
        h.update(chunk);
        if (copy_fd >= 0) {
            fsutil::write_all(copy_fd, chunk, source);
        }
        total += static_cast<std::uint64_t>(n);
    }
    if (total != static_cast<std::uint64_t>(st.st_size)) {
        throw Error(ErrorCode::IoError, source.string() + " changed while being read");
    }
    return h.finish();
}

} // namespace

Repo::Repo(fs::path root)
    : root_(std::move(root))
    , shared_(std::make_shared<Shared>())
{
}

Repo Repo::init(const fs::path &root_in)
{
    auto root = fs::absolute(root_in).lexically_normal();
    struct stat st{};
    if (::lstat(root.c_str(), &st) == 0) {
        if (!S_ISDIR(st.st_mode)) {
            throw Error(ErrorCode::CorruptRepo, root.string() + " exists and is not a directory");
        }
        if (fs::exists(root / "config")) {
            Repo repo = open(root);
            for (const char *sub : {"objects", "refs", "remotes", "tmp"}) {
                make_dir(root / sub);
            }
            return repo;
        }
        if (!fsutil::is_empty_dir(root)) {
            throw Error(ErrorCode::CorruptRepo,
                        root.string() + " is not empty and is not a runtimebox repository");
        }
    } else {
        std::error_code ec;
        fs::create_directories(root, ec);
        if (ec) {
            throw Error(ec == std::errc::permission_denied || ec == std::errc::read_only_file_system
                            ? ErrorCode::NotWritable
                            : ErrorCode::IoError,
                        "create " + root.string() + ": " + ec.message());
        }
    }
    if (::access(root.c_str(), W_OK) != 0) {
        throw_errno(ErrorCode::NotWritable, root.string(), errno);
    }
    fsutil::require_user_xattrs(root, "XDG_DATA_HOME (or RUNTIMEBOX_DATA_HOME)");

    for (const char *sub : {"objects", "refs", "remotes", "tmp"}) {
        make_dir(root / sub);
    }
    fsutil::FileLock lock(root / "lock", fsutil::FileLock::Mode::Exclusive);
    if (!fs::exists(root / "config")) {
        fsutil::write_file_atomic(root / "config", std::string(repo_format_line) + "\n");
    }
    return Repo(root);
}

Repo Repo::open(const fs::path &root_in)
{
    auto root = fs::absolute(root_in).lexically_normal();
    std::string config;
    try {
        config = fsutil::read_file(root / "config");
    } catch (const Error &) {
        throw Error(ErrorCode::CorruptRepo, root.string() + " is not a runtimebox repository");
    }
    auto first_line = std::string_view(config).substr(0, config.find('\n'));
    if (first_line != repo_format_line) {
        throw Error(ErrorCode::CorruptRepo,
                    root.string() + "/config: unsupported format '" + std::string(first_line) + "'");
    }
    return Repo(root);
}

Repo::WriterScope::WriterScope(const Repo &repo)
    : repo_(repo)
{
    std::lock_guard guard(repo_.shared_->mu);
    if (repo_.shared_->writer_depth++ == 0) {
        try {
            repo_.shared_->writer_lock.emplace(repo_.root_ / "lock", fsutil::FileLock::Mode::Exclusive);
            // Anything left in tmp/ belongs to a writer that died mid-operation.
            fsutil::clear_directory(repo_.root_ / "tmp");
        } catch (...) {
            repo_.shared_->writer_depth = 0;
            repo_.shared_->writer_lock.reset();
            throw;
        }
    }
}

Repo::WriterScope::~WriterScope()
{
    std::lock_guard guard(repo_.shared_->mu);
    if (--repo_.shared_->writer_depth == 0) {
        repo_.shared_->writer_lock.reset();
    }
}

fs::path Repo::object_path(const ObjectId &id, ObjectKind kind) const
{
    auto hex = id.hex();
    return root_ / "objects" / hex.substr(0, 2)
           / (hex.substr(2) + "." + std::string(object_kind_suffix(kind)));
}

bool Repo::has_object(const ObjectId &id, ObjectKind kind) const
{
    struct stat st{};
    return ::lstat(object_path(id, kind).c_str(), &st) == 0 && S_ISREG(st.st_mode);
}

std::vector<ObjectRef> Repo::list_objects() const
{
    std::vector<ObjectRef> out;
    std::error_code ec;
    for (fs::directory_iterator shard(root_ / "objects", ec), end; !ec && shard != end;
         shard.increment(ec)) {
        auto prefix = shard->path().filename().native();
        if (prefix.size() != 2 || !shard->is_directory()) {
            continue;
        }
        for (fs::directory_iterator it(shard->path(), ec); !ec && it != end; it.increment(ec)) {
            auto name = it->path().filename().native();
            auto dot = name.find('.');
            if (dot == std::string::npos) {
                continue;
            }
            auto id = ObjectId::try_from_hex(prefix + name.substr(0, dot));
            auto kind = object_kind_from_suffix(std::string_view(name).substr(dot + 1));
            if (id && kind) {
                out.push_back({*id, *kind});
            }
        }
    }
    if (ec) {
        throw Error(ErrorCode::IoError, "scan objects: " + ec.message());
    }
    std::sort(out.begin(), out.end());
    return out;
}

fs::path Repo::staging_file() const
{
    static std::atomic<unsigned> counter{0};
    return root_ / "tmp" / ("obj." + std::to_string(::getpid()) + "." + std::to_string(counter++));
}

void Repo::install_object(const fs::path &staged, const ObjectRef &ref, mode_t mode) const
{
    auto target = object_path(ref);
    if (has_object(ref.id, ref.kind)) {
        ::unlink(staged.c_str());
        return;
    }
    if (::chmod(staged.c_str(), mode) != 0) {
        int err = errno;
        ::unlink(staged.c_str());
        throw_errno(ErrorCode::IoError, "chmod " + staged.string(), err);
    }
    make_dir(target.parent_path());
    if (::rename(staged.c_str(), target.c_str()) != 0) {
        int err = errno;
        ::unlink(staged.c_str());
        throw_errno(ErrorCode::IoError, "rename " + target.string(), err);
    }
}

ObjectId Repo::store_file(std::string_view content, bool executable)
{
    WriterScope writer(*this);
    auto id = file_object_id(content, executable);
    ObjectRef ref{id, ObjectKind::File};
    if (has_object(id, ObjectKind::File)) {
        return id;
    }
    auto staged = staging_file();
    UniqueFd fd(::open(staged.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0600));
    if (!fd) {
        throw_errno(write_error(errno), "create " + staged.string(), errno);
    }
    try {
        fsutil::write_all(fd.get(), content, staged);
    } catch (...) {
        ::unlink(staged.c_str());
        throw;
    }
    fd.reset();
    install_object(staged, ref, executable ? 0555 : 0444);
    return id;
}

ObjectId Repo::store_file_from_path(const fs::path &source, bool executable)
{
    WriterScope writer(*this);
    auto staged = staging_file();
    UniqueFd fd(::open(staged.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0600));
    if (!fd) {
        throw_errno(write_error(errno), "create " + staged.string(), errno);
    }
    ObjectId id;
    try {
        id = hash_file(source, executable, fd.get());
    } catch (...) {
        ::unlink(staged.c_str());
        throw;
    }
    fd.reset();
    install_object(staged, {id, ObjectKind::File}, executable ? 0555 : 0444);
    return id;
}

ObjectId Repo::store_tree_object(TreeObject tree)
{
    canonicalize(tree);
    auto bytes = serialize(tree);
    auto id = sha256(bytes);
    if (!has_object(id, ObjectKind::Tree)) {
        WriterScope writer(*this);
        admit_object({id, ObjectKind::Tree}, bytes, false);
    }
    return id;
}

ObjectId Repo::snapshot_dir(const fs::path &dir, const fs::path &relative,
                            const SnapshotFilter &exclude, bool write)
{
    TreeObject tree;
    for (const auto &entry : sorted_entries(dir)) {
        auto rel = relative / entry.name;
        if (exclude && exclude(rel)) {
            continue;
        }
        auto path = dir / entry.name;
        TreeEntry te;
        te.name = entry.name;
        if (S_ISREG(entry.st.st_mode)) {
            te.kind = EntryKind::File;
            te.executable = is_executable(entry.st);
            te.id = write ? store_file_from_path(path, te.executable)
                          : hash_file(path, te.executable, -1);
        } else if (S_ISDIR(entry.st.st_mode)) {
            te.kind = EntryKind::Dir;
            te.id = snapshot_dir(path, rel, exclude, write);
        } else if (S_ISLNK(entry.st.st_mode)) {
            te.kind = EntryKind::Symlink;
            te.target = read_link(path);
        } else {
            unsupported_entry(path, entry.st);
        }
        tree.entries.push_back(std::move(te));
    }
    if (!write) {
        return sha256(serialize(tree));
    }
    return store_tree_object(std::move(tree));
}

ObjectId Repo::hash_dir(const fs::path &dir, const fs::path &relative,
                        const SnapshotFilter &exclude) const
{
    // snapshot_dir never mutates the repo when write == false.
    return const_cast<Repo *>(this)->snapshot_dir(dir, relative, exclude, false);
}

ObjectId Repo::store_tree(const fs::path &dir, const SnapshotFilter &exclude)
{
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
    }
    WriterScope writer(*this);
    return snapshot_dir(dir, {}, exclude, true);
}

ObjectId Repo::hash_tree(const fs::path &dir, const SnapshotFilter &exclude) const
{
    if (!fs::is_directory(dir)) {
        throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
    }
    return hash_dir(dir, {}, exclude);
}

ObjectId Repo::commit(const ObjectId &tree, const std::optional<ObjectId> &parent,
                      const std::string &subject,
                      const std::map<std::string, std::string> &metadata, std::int64_t timestamp)
{
    WriterScope writer(*this);
    if (!has_object(tree, ObjectKind::Tree)) {
        throw Error(ErrorCode::MissingObject, "commit: tree " + tree.hex() + " not in repository");
    }
    if (parent && !has_object(*parent, ObjectKind::Commit)) {
        throw Error(ErrorCode::MissingObject, "commit: parent " + parent->hex() + " not in repository");
    }
    CommitObject c{tree, parent, timestamp, subject, metadata};
    auto bytes = serialize(c);
    auto id = sha256(bytes);
    admit_object({id, ObjectKind::Commit}, bytes, false);
    return id;
}

void Repo::admit_object(const ObjectRef &ref, std::string_view bytes, bool executable)
{
    ObjectId actual = ref.kind == ObjectKind::File ? file_object_id(bytes, executable) : sha256(bytes);
    if (actual != ref.id) {
        throw Error(ErrorCode::DigestMismatch,
                    "object " + describe(ref) + " has digest " + actual.hex());
    }
    if (has_object(ref.id, ref.kind)) {
        return;
    }
    auto staged = staging_file();
    UniqueFd fd(::open(staged.c_str(), O_WRONLY | O_CREAT | O_EXCL | O_CLOEXEC, 0600));
    if (!fd) {
        throw_errno(write_error(errno), "create " + staged.string(), errno);
    }
    try {
        fsutil::write_all(fd.get(), bytes, staged);
    } catch (...) {
        ::unlink(staged.c_str());
        throw;
    }
    fd.reset();
    install_object(staged, ref, ref.kind == ObjectKind::File && executable ? 0555 : 0444);
}

std::string Repo::read_object_bytes(const ObjectId &id, ObjectKind kind) const
{
    auto path = object_path(id, kind);
    if (!has_object(id, kind)) {
        throw Error(ErrorCode::MissingObject, "object " + describe({id, kind}) + " not in repository");
    }
    return fsutil::read_file(path);
}

TreeObject Repo::read_tree(const ObjectId &id) const
{
    auto bytes = read_object_bytes(id, ObjectKind::Tree);
    if (sha256(bytes) != id) {
        throw Error(ErrorCode::DigestMismatch, "object " + describe({id, ObjectKind::Tree}) + " is corrupt");
    }
    return deserialize_tree(bytes);
}

CommitObject Repo::read_commit(const ObjectId &id) const
{
    auto bytes = read_object_bytes(id, ObjectKind::Commit);
    if (sha256(bytes) != id) {
        throw Error(ErrorCode::DigestMismatch,
                    "object " + describe({id, ObjectKind::Commit}) + " is corrupt");
    }
    return deserialize_commit(bytes);
}

std::vector<ObjectId> Repo::history(const ObjectId &commit) const
{
    std::vector<ObjectId> out;
    std::set<ObjectId> seen;
    std::optional<ObjectId> cursor = commit;
    while (cursor && has_object(*cursor, ObjectKind::Commit) && seen.insert(*cursor).second) {
        out.push_back(*cursor);
        cursor = read_commit(*cursor).parent;
    }
    return out;
}

fs::path Repo::ref_path(const RuntimeRef &ref, std::string_view remote) const
{
    fs::path base = root_ / "refs";
    if (!remote.empty()) {
        if (auto why = check_ref_component(remote)) {
            throw Error(ErrorCode::MalformedRef, "invalid remote name '" + std::string(remote) + "'");
        }
        base = root_ / "remotes" / std::string(remote);
    }
    // Re-validate: RuntimeRef is an aggregate and may bypass the parser.
    auto checked = make_runtime_ref(ref.name, ref.arch, ref.version);
    return base / checked.name / checked.arch / checked.version;
}

void Repo::update_ref(const RuntimeRef &ref, const ObjectId &commit, std::string_view remote)
{
    auto path = ref_path(ref, remote);
    WriterScope writer(*this);
    if (!has_object(commit, ObjectKind::Commit)) {
        throw Error(ErrorCode::MissingObject, "update_ref: commit " + commit.hex() + " not in repository");
    }
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "create " + path.parent_path().string() + ": " + ec.message());
    }
    fsutil::write_file_atomic(path, commit.hex() + "\n", 0644, root_ / "tmp");
}

namespace {

std::optional<ObjectId> parse_ref_file(const fs::path &path)
{
    std::string text;
    try {
        text = fsutil::read_file(path);
    } catch (const Error &) {
        if (!fs::exists(path)) {
            return std::nullopt;
        }
        throw;
    }
    if (!text.empty() && text.back() == '\n') {
        text.pop_back();
    }
    auto id = ObjectId::try_from_hex(text);
    if (!id) {
        throw Error(ErrorCode::CorruptRepo, "ref file " + path.string() + " is malformed");
    }
    return id;
}

} // namespace

std::optional<ObjectId> Repo::read_ref(const RuntimeRef &ref, std::string_view remote) const
{
    auto path = ref_path(ref, remote);
    struct stat st{};
    if (::stat(path.c_str(), &st) != 0 || !S_ISREG(st.st_mode)) {
        return std::nullopt;
    }
    return parse_ref_file(path);
}

std::vector<std::pair<RuntimeRef, ObjectId>> Repo::list_refs(std::string_view remote) const
{
    fs::path base = remote.empty() ? root_ / "refs" : root_ / "remotes" / std::string(remote);
    std::vector<std::pair<RuntimeRef, ObjectId>> out;
    std::error_code ec;
    if (!fs::is_directory(base, ec)) {
        return out;
    }
    for (fs::directory_iterator n(base, ec), end; !ec && n != end; n.increment(ec)) {
        if (!n->is_directory()) {
            continue;
        }
        for (fs::directory_iterator a(n->path(), ec); !ec && a != end; a.increment(ec)) {
            if (!a->is_directory()) {
                continue;
            }
            for (fs::directory_iterator v(a->path(), ec); !ec && v != end; v.increment(ec)) {
                if (!v->is_regular_file()) {
                    continue;
                }
                RuntimeRef ref{n->path().filename(), a->path().filename(), v->path().filename()};
                if (check_ref_component(ref.name) || check_ref_component(ref.arch)
                    || check_ref_component(ref.version)) {
                    continue;
                }
                if (auto id = parse_ref_file(v->path())) {
                    out.emplace_back(std::move(ref), *id);
                }
            }
        }
    }
    if (ec) {
        throw Error(ErrorCode::IoError, "list refs: " + ec.message());
    }
    std::sort(out.begin(), out.end(), [](const auto &x, const auto &y) {
        return format_runtime_ref(x.first) < format_runtime_ref(y.first);
    });
    return out;
}

void Repo::checkout_into(const ObjectId &tree_id, const fs::path &dest, CheckoutMode mode) const
{
    auto tree = read_tree(tree_id);
    for (const auto &entry : tree.entries) {
        auto target = dest / entry.name;
        switch (entry.kind) {
        case EntryKind::Dir:
            if (::mkdir(target.c_str(), 0755) != 0) {
                throw_errno(write_error(errno), "mkdir " + target.string(), errno);
            }
            checkout_into(entry.id, target, mode);
            break;
        case EntryKind::Symlink:
            if (::symlink(entry.target.c_str(), target.c_str()) != 0) {
                throw_errno(write_error(errno), "symlink " + target.string(), errno);
            }
            break;
        case EntryKind::File: {
            auto source = object_path(entry.id, ObjectKind::File);
            if (!has_object(entry.id, ObjectKind::File)) {
                throw Error(ErrorCode::MissingObject,
                            "object " + describe({entry.id, ObjectKind::File}) + " (for "
                                + target.string() + ") not in repository");
            }
            if (mode == CheckoutMode::Hardlink) {
                if (::link(source.c_str(), target.c_str()) == 0) {
                    break;
                }
                if (errno == EXDEV) {
                    throw Error(ErrorCode::CrossDevice,
                                "cannot hardlink " + target.string()
                                    + " across filesystems; retry with copy mode");
                }
                if (errno != EMLINK) {
                    throw_errno(write_error(errno), "link " + target.string(), errno);
                }
            }
            std::error_code ec;
            fs::copy_file(source, target, ec);
            if (ec) {
                throw Error(ErrorCode::IoError, "copy " + target.string() + ": " + ec.message());
            }
            if (::chmod(target.c_str(), entry.executable ? 0555 : 0444) != 0) {
                throw_errno(ErrorCode::IoError, "chmod " + target.string(), errno);
            }
            break;
        }
        }
    }
}

void Repo::checkout_tree(const ObjectId &tree, const fs::path &dest, CheckoutMode mode) const
{
    bool created = false;
    struct stat st{};
    if (::lstat(dest.c_str(), &st) == 0) {
        if (!S_ISDIR(st.st_mode) || !fsutil::is_empty_dir(dest)) {
            throw Error(ErrorCode::DestNotEmpty, "checkout destination " + dest.string() + " is not empty");
        }
    } else {
        if (::mkdir(dest.c_str(), 0755) != 0) {
            throw_errno(write_error(errno), "mkdir " + dest.string(), errno);
        }
        created = true;
    }
    try {
        checkout_into(tree, dest, mode);
    } catch (...) {
        if (created) {
            fsutil::remove_tree(dest);
        } else {
            fsutil::clear_directory(dest);
        }
        throw;
    }
}

void Repo::checkout(const ObjectId &commit, const fs::path &dest, CheckoutMode mode) const
{
    checkout_tree(read_commit(commit).tree, dest, mode);
}

FsckReport Repo::fsck() const
{
    FsckReport report;
    auto objects = list_objects();
    std::set<ObjectRef> present(objects.begin(), objects.end());
    auto note_missing = [&](const std::string &from, const ObjectRef &target) {
        if (!present.contains(target)) {
            report.dangling.push_back({from, target});
        }
    };

    for (const auto &obj : objects) {
        ++report.objects_scanned;
        auto path = object_path(obj);
        try {
            if (obj.kind == ObjectKind::File) {
                struct stat st{};
                if (::lstat(path.c_str(), &st) != 0 || hash_file(path, is_executable(st), -1) != obj.id) {
                    report.digest_mismatches.push_back(obj);
                }
                continue;
            }
            auto bytes = fsutil::read_file(path);
            if (sha256(bytes) != obj.id) {
                report.digest_mismatches.push_back(obj);
                continue;
            }
            if (obj.kind == ObjectKind::Tree) {
                for (const auto &e : deserialize_tree(bytes).entries) {
                    if (e.kind == EntryKind::File) {
                        note_missing(describe(obj), {e.id, ObjectKind::File});
                    } else if (e.kind == EntryKind::Dir) {
                        note_missing(describe(obj), {e.id, ObjectKind::Tree});
                    }
                }
            } else {
                // Parent commits are history, not closure: shallow pulls omit them.
                note_missing(describe(obj), {deserialize_commit(bytes).tree, ObjectKind::Tree});
            }
        } catch (const Error &) {
            report.digest_mismatches.push_back(obj);
        }
    }

    for (const auto &[ref, id] : list_refs()) {
        note_missing("refs/" + format_runtime_ref(ref), {id, ObjectKind::Commit});
    }
    std::error_code ec;
    for (fs::directory_iterator it(root_ / "remotes", ec), end; !ec && it != end; it.increment(ec)) {
        auto remote = it->path().filename().string();
        if (check_ref_component(remote)) {
            continue;
        }
        for (const auto &[ref, id] : list_refs(remote)) {
            note_missing("remotes/" + remote + "/" + format_runtime_ref(ref), {id, ObjectKind::Commit});
        }
    }
    return report;
}

} // namespace runtimebox
