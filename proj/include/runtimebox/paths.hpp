/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <filesystem>

namespace runtimebox {

namespace fs = std::filesystem;

/// $RUNTIMEBOX_DATA_HOME, else $XDG_DATA_HOME, else $HOME/.local/share;
/// followed by org.mardi.maps/ostree/repo.
fs::path default_repo_path();

/// $RUNTIMEBOX_STATE_HOME, else $HOME/.var/org.mardi.maps.
fs::path default_state_root();

/// $HOME, falling back to the password database.
fs::path home_directory();

} // namespace runtimebox
