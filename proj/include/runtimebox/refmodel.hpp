/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace runtimebox {

/// Runtime identity `name/arch/version`. Every component is also used as a
/// path component on disk and in URLs, so construction goes through
/// parse_runtime_ref() or make_runtime_ref(), which enforce the character
/// policy.
struct RuntimeRef {
    std::string name;
    std::string arch;
    std::string version;

    auto operator<=>(const RuntimeRef &) const = default;
};

/// Returns nullopt when `component` is usable, otherwise a reason.
std::optional<std::string> check_ref_component(std::string_view component);

RuntimeRef parse_runtime_ref(std::string_view text);
RuntimeRef make_runtime_ref(std::string name, std::string arch, std::string version);
std::string format_runtime_ref(const RuntimeRef &ref);

struct Manifest {
    std::optional<std::string> command;
    // Dotted-path keys, e.g. "Meta.URL".
    std::map<std::string, std::string> meta;
};

Manifest parse_manifest(std::string_view bytes);

enum class CommandSource { CliOverride, Manifest, DefaultShell };

std::string_view command_source_name(CommandSource source) noexcept;

struct CommandSpec {
    std::vector<std::string> argv;
    CommandSource source;
};

inline const std::vector<std::string> &default_shell_argv()
{
    static const std::vector<std::string> argv{"/bin/sh", "-l"};
    return argv;
}

/// POSIX shell word splitting with quote removal. No expansion of any kind
/// is performed: `$`, globs and tildes are kept literally.
std::vector<std::string> split_command_line(std::string_view line);

CommandSpec resolve_command(const std::optional<Manifest> &manifest,
                            const std::optional<std::string> &cli_override);

} // namespace runtimebox
