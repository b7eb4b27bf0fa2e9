/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "fixtures.hpp"

#include "runtimebox/remote.hpp"

namespace fixtures {

Publisher::Publisher(const fs::path &dir)
    : repo_(runtimebox::Repo::init(dir / "publisher"))
    , served_(dir / "served")
{
    runtimebox::export_repo(repo_, served_);
}

runtimebox::ObjectId Publisher::publish(const runtimebox::RuntimeRef &ref, const fs::path &tree,
                                        std::int64_t timestamp)
{
    auto commit = repo_.commit(repo_.store_tree(tree), repo_.read_ref(ref), "publish", {}, timestamp);
    repo_.update_ref(ref, commit);
    runtimebox::export_repo(repo_, served_);
    return commit;
}

} // namespace fixtures
