/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

// Canonical object model of the content-addressed store.
//
// An ObjectId is the SHA-256 of an object's canonical serialization. All
// integers are big-endian.
//
//   file   : 0x01 | exec:u8 | size:u64 | content
//   tree   : 0x02 | count:u32 | entry*
//            entry = name_len:u32 | name | kind:u8 | body
//              kind 0x01 (file)    body = exec:u8 | id[32]
//              kind 0x02 (dir)     body = id[32]
//              kind 0x03 (symlink) body = target_len:u32 | target
//   commit : 0x03 | tree[32] | has_parent:u8 | parent[32]? | timestamp:i64
//            | subject_len:u32 | subject | meta_count:u32
//            | (key_len:u32 | key | value_len:u32 | value)*
//
// Tree entries are strictly ascending by byte-wise name; commit metadata is
// strictly ascending by key. Tree and commit objects are stored and
// transferred as exactly these bytes. File objects are stored and transferred
// as raw content only (so they can be hardlinked into checkouts); the header
// is re-derived from the file mode locally and from the referencing tree
// entry during transfer.

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace runtimebox {

class ObjectId {
public:
    static constexpr std::size_t size = 32;

    ObjectId() = default;
    explicit ObjectId(const std::array<std::uint8_t, size> &bytes)
        : bytes_(bytes)
    {
    }

    static ObjectId from_hex(std::string_view hex);
    static std::optional<ObjectId> try_from_hex(std::string_view hex);

    std::string hex() const;
    std::string short_hex() const { return hex().substr(0, 12); }
    const std::array<std::uint8_t, size> &bytes() const { return bytes_; }

    auto operator<=>(const ObjectId &) const = default;

private:
    std::array<std::uint8_t, size> bytes_{};
};

enum class ObjectKind : std::uint8_t { File = 0x01, Tree = 0x02, Commit = 0x03 };

std::string_view object_kind_suffix(ObjectKind kind) noexcept;
std::optional<ObjectKind> object_kind_from_suffix(std::string_view suffix) noexcept;

/// Incremental SHA-256.
class Sha256 {
public:
    Sha256();
    ~Sha256();
    Sha256(const Sha256 &) = delete;
    Sha256 &operator=(const Sha256 &) = delete;

    void update(std::span<const std::byte> data);
    void update(std::string_view data)
    {
        update(std::as_bytes(std::span(data.data(), data.size())));
    }
    ObjectId finish();

private:
    void *ctx_;
};

ObjectId sha256(std::string_view data);

/// Header that precedes file content in the hashing input.
std::string file_object_header(bool executable, std::uint64_t size);
ObjectId file_object_id(std::string_view content, bool executable);

enum class EntryKind : std::uint8_t { File = 0x01, Dir = 0x02, Symlink = 0x03 };

struct TreeEntry {
    std::string name;
    EntryKind kind{EntryKind::File};
    ObjectId id;          // file and dir
    std::string target;   // symlink
    bool executable{false};

    bool operator==(const TreeEntry &) const = default;
};

struct TreeObject {
    std::vector<TreeEntry> entries;

    bool operator==(const TreeObject &) const = default;
};

struct CommitObject {
    ObjectId tree;
    std::optional<ObjectId> parent;
    std::int64_t timestamp{0};
    std::string subject;
    std::map<std::string, std::string> metadata;

    bool operator==(const CommitObject &) const = default;
};

/// Returns nullopt when `name` is a legal tree entry name.
std::optional<std::string> check_entry_name(std::string_view name);

/// Sorts entries and validates names; throws CorruptRepo on duplicates.
void canonicalize(TreeObject &tree);

std::string serialize(const TreeObject &tree);
std::string serialize(const CommitObject &commit);

/// Strict inverses of serialize(): any input that is not the canonical
/// serialization of some object is rejected with CorruptRepo.
TreeObject deserialize_tree(std::string_view bytes);
CommitObject deserialize_commit(std::string_view bytes);

} // namespace runtimebox
