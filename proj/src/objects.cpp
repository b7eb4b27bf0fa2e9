/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/objects.hpp"

#include "runtimebox/error.hpp"

#include <openssl/evp.h>

#include <algorithm>

namespace runtimebox {

namespace {

constexpr char hex_digits[] = "0123456789abcdef";

int hex_value(char c)
{
    if (c >= '0' && c <= '9') {
        return c - '0';
    }
    if (c >= 'a' && c <= 'f') {
        return c - 'a' + 10;
    }
    return -1;
}

void put_u8(std::string &out, std::uint8_t v)
{
    out.push_back(static_cast<char>(v));
}

void put_u32(std::string &out, std::uint32_t v)
{
    for (int shift = 24; shift >= 0; shift -= 8) {
        out.push_back(static_cast<char>((v >> shift) & 0xff));
    }
}

void put_u64(std::string &out, std::uint64_t v)
{
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<char>((v >> shift) & 0xff));
    }
}

void put_id(std::string &out, const ObjectId &id)
{
    out.append(reinterpret_cast<const char *>(id.bytes().data()), ObjectId::size);
}

void put_string(std::string &out, std::string_view s)
{
    if (s.size() > UINT32_MAX) {
        throw Error(ErrorCode::IoError, "string too long for object encoding");
    }
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

class Reader {
public:
    Reader(std::string_view data, const char *what)
        : data_(data)
        , what_(what)
    {
    }

    [[noreturn]] void fail(const std::string &why) const
    {
        throw Error(ErrorCode::CorruptRepo, std::string("malformed ") + what_ + " object: " + why);
    }

    std::uint8_t u8()
    {
        need(1);
        return static_cast<std::uint8_t>(data_[pos_++]);
    }

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v = (v << 8) | static_cast<std::uint8_t>(data_[pos_++]);
        }
        return v;
    }

    std::uint64_t u64()
    {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v = (v << 8) | static_cast<std::uint8_t>(data_[pos_++]);
        }
        return v;
    }

    ObjectId id()
    {
        need(ObjectId::size);
        std::array<std::uint8_t, ObjectId::size> bytes{};
        std::copy_n(reinterpret_cast<const std::uint8_t *>(data_.data() + pos_), ObjectId::size,
                    bytes.begin());
        pos_ += ObjectId::size;
        return ObjectId(bytes);
    }

    std::string string()
    {
        auto len = u32();
        need(len);
        std::string s(data_.substr(pos_, len));
        pos_ += len;
        return s;
    }

    void expect_end() const
    {
        if (pos_ != data_.size()) {
            fail("trailing bytes");
        }
    }

private:
    void need(std::size_t n) const
    {
        if (data_.size() - pos_ < n) {
            fail("truncated");
        }
    }

    std::string_view data_;
    const char *what_;
    std::size_t pos_{0};
};

} // namespace

ObjectId ObjectId::from_hex(std::string_view hex)
{
    auto id = try_from_hex(hex);
    if (!id) {
        throw Error(ErrorCode::CorruptRepo, "invalid object id '" + std::string(hex) + "'");
    }
    return *id;
}

std::optional<ObjectId> ObjectId::try_from_hex(std::string_view hex)
{
    if (hex.size() != size * 2) {
        return std::nullopt;
    }
    std::array<std::uint8_t, size> bytes{};
    for (std::size_t i = 0; i < size; ++i) {
        int hi = hex_value(hex[2 * i]);
        int lo = hex_value(hex[2 * i + 1]);
        if (hi < 0 || lo < 0) {
            return std::nullopt;
        }
        bytes[i] = static_cast<std::uint8_t>(hi << 4 | lo);
    }
    return ObjectId(bytes);
}

std::string ObjectId::hex() const
{
    std::string out;
    out.reserve(size * 2);
    for (auto b : bytes_) {
        out.push_back(hex_digits[b >> 4]);
        out.push_back(hex_digits[b & 0xf]);
    }
    return out;
}

std::string_view object_kind_suffix(ObjectKind kind) noexcept
{
    switch (kind) {
    case ObjectKind::File: return "file";
    case ObjectKind::Tree: return "tree";
    case ObjectKind::Commit: return "commit";
    }
    return "";
}

std::optional<ObjectKind> object_kind_from_suffix(std::string_view suffix) noexcept
{
    if (suffix == "file") {
        return ObjectKind::File;
    }
    if (suffix == "tree") {
        return ObjectKind::Tree;
    }
    if (suffix == "commit") {
        return ObjectKind::Commit;
    }
    return std::nullopt;
}

Sha256::Sha256()
    : ctx_(EVP_MD_CTX_new())
{
    if (ctx_ == nullptr || EVP_DigestInit_ex(static_cast<EVP_MD_CTX *>(ctx_), EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("EVP_DigestInit_ex failed");
    }
}

Sha256::~Sha256()
{
    EVP_MD_CTX_free(static_cast<EVP_MD_CTX *>(ctx_));
}

void Sha256::update(std::span<const std::byte> data)
{
    EVP_DigestUpdate(static_cast<EVP_MD_CTX *>(ctx_), data.data(), data.size());
}

ObjectId Sha256::finish()
{
    std::array<std::uint8_t, ObjectId::size> out{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX *>(ctx_), out.data(), &len);
    return ObjectId(out);
}

ObjectId sha256(std::string_view data)
{
    Sha256 h;
    h.update(data);
    return h.finish();
}

std::string file_object_header(bool executable, std::uint64_t size)
{
    std::string out;
    put_u8(out, static_cast<std::uint8_t>(ObjectKind::File));
    put_u8(out, executable ? 1 : 0);
    put_u64(out, size);
    return out;
}

ObjectId file_object_id(std::string_view content, bool executable)
{
    Sha256 h;
    h.update(file_object_header(executable, content.size()));
    h.update(content);
    return h.finish();
}

std::optional<std::string> check_entry_name(std::string_view name)
{
    if (name.empty()) {
        return "empty name";
    }
    if (name == "." || name == "..") {
        return "reserved name";
    }
    if (name.find('/') != std::string_view::npos) {
        return "name contains '/'";
    }
    if (name.find('\0') != std::string_view::npos) {
        return "name contains NUL";
    }
    return std::nullopt;
}

void canonicalize(TreeObject &tree)
{
    std::sort(tree.entries.begin(), tree.entries.end(),
              [](const TreeEntry &a, const TreeEntry &b) { return a.name < b.name; });
    for (std::size_t i = 0; i < tree.entries.size(); ++i) {
        auto &entry = tree.entries[i];
        if (auto why = check_entry_name(entry.name)) {
            throw Error(ErrorCode::CorruptRepo, "invalid tree entry name '" + entry.name + "': " + *why);
        }
        if (i > 0 && tree.entries[i - 1].name == entry.name) {
            throw Error(ErrorCode::CorruptRepo, "duplicate tree entry '" + entry.name + "'");
        }
        if (entry.kind != EntryKind::File) {
            entry.executable = false;
        }
        if (entry.kind != EntryKind::Symlink) {
            entry.target.clear();
        } else {
            entry.id = ObjectId{};
        }
    }
}

std::string serialize(const TreeObject &tree)
{
    std::string out;
    put_u8(out, static_cast<std::uint8_t>(ObjectKind::Tree));
    put_u32(out, static_cast<std::uint32_t>(tree.entries.size()));
    for (const auto &entry : tree.entries) {
        put_string(out, entry.name);
        put_u8(out, static_cast<std::uint8_t>(entry.kind));
        switch (entry.kind) {
        case EntryKind::File:
            put_u8(out, entry.executable ? 1 : 0);
            put_id(out, entry.id);
            break;
        case EntryKind::Dir:
            put_id(out, entry.id);
            break;
        case EntryKind::Symlink:
            put_string(out, entry.target);
            break;
        }
    }
    return out;
}

std::string serialize(const CommitObject &commit)
{
    std::string out;
    put_u8(out, static_cast<std::uint8_t>(ObjectKind::Commit));
    put_id(out, commit.tree);
    put_u8(out, commit.parent ? 1 : 0);
    if (commit.parent) {
        put_id(out, *commit.parent);
    }
    put_u64(out, static_cast<std::uint64_t>(commit.timestamp));
    put_string(out, commit.subject);
    put_u32(out, static_cast<std::uint32_t>(commit.metadata.size()));
    for (const auto &[key, value] : commit.metadata) {
        put_string(out, key);
        put_string(out, value);
    }
    return out;
}

TreeObject deserialize_tree(std::string_view bytes)
{
    Reader in(bytes, "tree");
    if (in.u8() != static_cast<std::uint8_t>(ObjectKind::Tree)) {
        in.fail("wrong kind tag");
    }
    auto count = in.u32();
    TreeObject tree;
    // Every entry takes at least 4 + 1 + 1 + 4 bytes; bounds the reservation.
    tree.entries.reserve(std::min<std::size_t>(count, bytes.size() / 10));
    for (std::uint32_t i = 0; i < count; ++i) {
        TreeEntry entry;
        entry.name = in.string();
        if (auto why = check_entry_name(entry.name)) {
            in.fail("entry name: " + *why);
        }
        if (!tree.entries.empty() && !(tree.entries.back().name < entry.name)) {
            in.fail("entries not strictly sorted");
        }
        auto kind = in.u8();
        switch (kind) {
        case 0x01: {
            entry.kind = EntryKind::File;
            auto exec = in.u8();
            if (exec > 1) {
                in.fail("bad executable flag");
            }
            entry.executable = exec == 1;
            entry.id = in.id();
            break;
        }
        case 0x02:
            entry.kind = EntryKind::Dir;
            entry.id = in.id();
            break;
        case 0x03:
            entry.kind = EntryKind::Symlink;
            entry.target = in.string();
            if (entry.target.empty() || entry.target.find('\0') != std::string::npos) {
                in.fail("bad symlink target");
            }
            break;
        default:
            in.fail("unknown entry kind");
        }
        tree.entries.push_back(std::move(entry));
    }
    in.expect_end();
    return tree;
}

CommitObject deserialize_commit(std::string_view bytes)
{
    Reader in(bytes, "commit");
    if (in.u8() != static_cast<std::uint8_t>(ObjectKind::Commit)) {
        in.fail("wrong kind tag");
    }
    CommitObject commit;
    commit.tree = in.id();
    auto has_parent = in.u8();
    if (has_parent > 1) {
        in.fail("bad parent flag");
    }
    if (has_parent == 1) {
        commit.parent = in.id();
    }
    commit.timestamp = static_cast<std::int64_t>(in.u64());
    commit.subject = in.string();
    auto count = in.u32();
    std::string previous;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto key = in.string();
        if (i > 0 && !(previous < key)) {
            in.fail("metadata keys not strictly sorted");
        }
        auto value = in.string();
        previous = key;
        commit.metadata.emplace_hint(commit.metadata.end(), std::move(key), std::move(value));
    }
    in.expect_end();
    return commit;
}

} // namespace runtimebox
