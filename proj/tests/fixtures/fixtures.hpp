/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include "runtimebox/casstore.hpp"

#include <filesystem>
#include <string>

namespace fixtures {

namespace fs = std::filesystem;

/// A publisher repository plus its static export directory.
class Publisher {
public:
    explicit Publisher(const fs::path &dir);

    /// Commits `tree` on top of the ref's current head and re-exports.
    runtimebox::ObjectId publish(const runtimebox::RuntimeRef &ref, const fs::path &tree, std::int64_t timestamp = 0);

    runtimebox::Repo &repo() { return repo_; }
    const fs::path &served() const { return served_; }
    std::string file_url() const { return "file://" + served_.string(); }

private:
    runtimebox::Repo repo_;
    fs::path served_;
};

} // namespace fixtures
