/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// On-disk repository layout:
//
//   <repo>/config                          "runtimebox-repo-v1" + remote lines
//   <repo>/objects/<aa>/<62 hex>.<kind>    kind in {file, tree, commit}
//   <repo>/refs/<name>/<arch>/<version>    one 64-hex line
//   <repo>/remotes/<remote>/<name>/<arch>/<version>
//   <repo>/lock                            writer lock (flock)
//   <repo>/tmp/                            staging for atomic renames
//
// File objects hold raw content with mode 0444 (0555 when executable), which
// lets checkouts hardlink them directly.

#include "runtimebox/fsutil.hpp"
#include "runtimebox/objects.hpp"
#include "runtimebox/refmodel.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace runtimebox {

namespace fs = std::filesystem;

inline constexpr std::string_view repo_format_line = "runtimebox-repo-v1";

enum class CheckoutMode { Hardlink, Copy };

struct ObjectRef {
    ObjectId id;
    ObjectKind kind;

    auto operator<=>(const ObjectRef &) const = default;
};

std::string describe(const ObjectRef &ref);

struct FsckReport {
    struct Dangling {
        std::string from;    // object path or ref
        ObjectRef missing;
    };

    std::size_t objects_scanned{0};
    std::vector<ObjectRef> digest_mismatches;
    std::vector<Dangling> dangling;

    bool clean() const { return digest_mismatches.empty() && dangling.empty(); }
    std::string summary() const;
};

/// Root-relative paths for which this returns true are left out of a snapshot.
using SnapshotFilter = std::function<bool(const fs::path &relative)>;

class Repo {
public:
    /// Creates the skeleton when absent; a no-op on an existing repository.
    static Repo init(const fs::path &root);
    static Repo open(const fs::path &root);

    const fs::path &root() const { return root_; }
    fs::path config_path() const { return root_ / "config"; }

    fs::path object_path(const ObjectId &id, ObjectKind kind) const;
    fs::path object_path(const ObjectRef &ref) const { return object_path(ref.id, ref.kind); }
    bool has_object(const ObjectId &id, ObjectKind kind) const;
    /// All stored objects, sorted.
    std::vector<ObjectRef> list_objects() const;
    std::size_t object_count() const { return list_objects().size(); }

    ObjectId store_file(std::string_view content, bool executable);
    ObjectId store_file_from_path(const fs::path &source, bool executable);
    ObjectId store_tree(const fs::path &dir, const SnapshotFilter &exclude = {});
    ObjectId store_tree_object(TreeObject tree);
    ObjectId commit(const ObjectId &tree, const std::optional<ObjectId> &parent,
                    const std::string &subject, const std::map<std::string, std::string> &metadata,
                    std::int64_t timestamp);

    /// The id store_tree() would return, without writing anything.
    ObjectId hash_tree(const fs::path &dir, const SnapshotFilter &exclude = {}) const;

    std::string read_object_bytes(const ObjectId &id, ObjectKind kind) const;
    TreeObject read_tree(const ObjectId &id) const;
    CommitObject read_commit(const ObjectId &id) const;
    /// The commit followed by its locally present ancestors, newest first.
    std::vector<ObjectId> history(const ObjectId &commit) const;

    /// An empty `remote` addresses the local ref namespace.
    void update_ref(const RuntimeRef &ref, const ObjectId &commit, std::string_view remote = {});
    std::optional<ObjectId> read_ref(const RuntimeRef &ref, std::string_view remote = {}) const;
    std::vector<std::pair<RuntimeRef, ObjectId>> list_refs(std::string_view remote = {}) const;

    void checkout(const ObjectId &commit, const fs::path &dest, CheckoutMode mode) const;
    void checkout_tree(const ObjectId &tree, const fs::path &dest, CheckoutMode mode) const;

    FsckReport fsck() const;

    /// Verifies `bytes` against `id` and stores them. Throws DigestMismatch
    /// without touching the object directory on failure. Safe to call from
    /// several threads while the caller holds a WriterScope.
    void admit_object(const ObjectRef &ref, std::string_view bytes, bool executable);

    /// Reentrant writer lock: the repo-wide flock is taken by the outermost
    /// scope of this handle and released when it ends.
    class WriterScope {
    public:
        explicit WriterScope(const Repo &repo);
        ~WriterScope();
        WriterScope(const WriterScope &) = delete;
        WriterScope &operator=(const WriterScope &) = delete;

    private:
        const Repo &repo_;
    };

private:
    struct Shared;

    explicit Repo(fs::path root);

    fs::path ref_path(const RuntimeRef &ref, std::string_view remote) const;
    fs::path staging_file() const;
    void install_object(const fs::path &staged, const ObjectRef &ref, mode_t mode) const;
    ObjectId snapshot_dir(const fs::path &dir, const fs::path &relative,
                          const SnapshotFilter &exclude, bool write);
    ObjectId hash_dir(const fs::path &dir, const fs::path &relative,
                      const SnapshotFilter &exclude) const;
    void checkout_into(const ObjectId &tree, const fs::path &dest, CheckoutMode mode) const;

    fs::path root_;
    std::shared_ptr<Shared> shared_;
};

} // namespace runtimebox
