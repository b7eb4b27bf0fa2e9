/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/paths.hpp"

#include "runtimebox/error.hpp"
#include "runtimebox/fsutil.hpp"

#include <pwd.h>
#include <unistd.h>

namespace runtimebox {

fs::path home_directory()
{
    auto home = fsutil::env_or("HOME", "");
    if (!home.empty()) {
        return home;
    }
    if (const passwd *pw = ::getpwuid(::getuid()); pw && pw->pw_dir) {
        return pw->pw_dir;
    }
    throw Error(ErrorCode::UsageError, "HOME is not set");
}

fs::path default_repo_path()
{
    auto data = fsutil::env_or("RUNTIMEBOX_DATA_HOME", fsutil::env_or("XDG_DATA_HOME", ""));
    fs::path base = data.empty() ? home_directory() / ".local" / "share" : fs::path(data);
    return base / "org.mardi.maps" / "ostree" / "repo";
}

fs::path default_state_root()
{
    auto state = fsutil::env_or("RUNTIMEBOX_STATE_HOME", "");
    if (!state.empty()) {
        return state;
    }
    return home_directory() / ".var" / "org.mardi.maps";
}

} // namespace runtimebox
