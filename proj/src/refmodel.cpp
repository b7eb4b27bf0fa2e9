/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/refmodel.hpp"

#include "runtimebox/error.hpp"

#include <sstream>

#define TOML_ENABLE_FORMATTERS 1
#include <toml.hpp>

namespace runtimebox {

namespace {

bool is_blank(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

} // namespace

std::optional<std::string> check_ref_component(std::string_view component)
{
    if (component.empty()) {
        return "empty component";
    }
    if (component.front() == '.') {
        return "component starts with '.'";
    }
    if (component.find("..") != std::string_view::npos) {
        return "component contains '..'";
    }
    for (unsigned char c : component) {
        if (c == '/') {
            return "component contains '/'";
        }
        if (c < 0x20 || c == 0x7f || is_blank(static_cast<char>(c))) {
            return "component contains whitespace or control characters";
        }
    }
    return std::nullopt;
}

RuntimeRef make_runtime_ref(std::string name, std::string arch, std::string version)
{
    for (const auto *part : {&name, &arch, &version}) {
        if (auto why = check_ref_component(*part)) {
            throw Error(ErrorCode::MalformedRef,
                        "invalid runtime reference component '" + *part + "': " + *why);
        }
    }
    return RuntimeRef{std::move(name), std::move(arch), std::move(version)};
}

RuntimeRef parse_runtime_ref(std::string_view text)
{
    auto first = text.find('/');
    auto second = first == std::string_view::npos ? first : text.find('/', first + 1);
    if (first == std::string_view::npos || second == std::string_view::npos
        || text.find('/', second + 1) != std::string_view::npos) {
        throw Error(ErrorCode::MalformedRef,
                    "malformed runtime reference '" + std::string(text)
                        + "': expected <name>/<arch>/<version>");
    }
    try {
        return make_runtime_ref(std::string(text.substr(0, first)),
                                std::string(text.substr(first + 1, second - first - 1)),
                                std::string(text.substr(second + 1)));
    } catch (const Error &e) {
        throw Error(ErrorCode::MalformedRef,
                    "malformed runtime reference '" + std::string(text) + "': " + e.what());
    }
}

std::string format_runtime_ref(const RuntimeRef &ref)
{
    return ref.name + '/' + ref.arch + '/' + ref.version;
}

namespace {

std::string render_value(const toml::node &node)
{
    if (auto s = node.as_string()) {
        return s->get();
    }
    std::ostringstream os;
    node.visit([&os](const auto &v) { os << v; });
    return os.str();
}

void flatten(const toml::table &table, const std::string &prefix,
             std::map<std::string, std::string> &out)
{
    for (const auto &[key, node] : table) {
        std::string path = prefix.empty() ? std::string(key.str())
                                           : prefix + "." + std::string(key.str());
        if (auto sub = node.as_table()) {
            flatten(*sub, path, out);
        } else {
            out[path] = render_value(node);
        }
    }
}

} // namespace

Manifest parse_manifest(std::string_view bytes)
{
    toml::table doc;
    try {
        doc = toml::parse(bytes, std::string_view("manifest.toml"));
    } catch (const toml::parse_error &e) {
        std::ostringstream os;
        os << "manifest.toml:" << e.source().begin.line << ":" << e.source().begin.column << ": "
           << e.description();
        throw Error(ErrorCode::ManifestSyntax, os.str());
    }

    Manifest manifest;
    if (auto core = doc.get("Core")) {
        auto core_table = core->as_table();
        if (!core_table) {
            throw Error(ErrorCode::ManifestType, "manifest: 'Core' must be a table");
        }
        if (auto command = core_table->get("command")) {
            auto str = command->as_string();
            if (!str) {
                throw Error(ErrorCode::ManifestType,
                            "manifest: [Core] command must be a string");
            }
            if (str->get().empty()) {
                throw Error(ErrorCode::ManifestType,
                            "manifest: [Core] command must not be empty");
            }
            manifest.command = str->get();
            core_table->erase("command");
        }
    }
    flatten(doc, "", manifest.meta);
    return manifest;
}

std::string_view command_source_name(CommandSource source) noexcept
{
    switch (source) {
    case CommandSource::CliOverride: return "cli-override";
    case CommandSource::Manifest: return "manifest";
    case CommandSource::DefaultShell: return "default-shell";
    }
    return "unknown";
}

std::vector<std::string> split_command_line(std::string_view line)
{
    std::vector<std::string> words;
    std::string current;
    bool in_word = false;

    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (is_blank(c)) {
            if (in_word) {
                words.push_back(std::move(current));
                current.clear();
                in_word = false;
            }
            continue;
        }
        in_word = true;
        if (c == '\\') {
            if (i + 1 == line.size()) {
                current += c;
            } else if (line[i + 1] == '\n') {
                ++i;
            } else {
                current += line[++i];
            }
        } else if (c == '\'') {
            auto end = line.find('\'', i + 1);
            if (end == std::string_view::npos) {
                throw Error(ErrorCode::MalformedCommand,
                            "unterminated single quote in command: " + std::string(line));
            }
            current.append(line.substr(i + 1, end - i - 1));
            i = end;
        } else if (c == '"') {
            bool closed = false;
            for (++i; i < line.size(); ++i) {
                char d = line[i];
                if (d == '"') {
                    closed = true;
                    break;
                }
                if (d == '\\' && i + 1 < line.size()) {
                    char next = line[i + 1];
                    if (next == '$' || next == '`' || next == '"' || next == '\\') {
                        current += next;
                        ++i;
                        continue;
                    }
                    if (next == '\n') {
                        ++i;
                        continue;
                    }
                }
                current += d;
            }
            if (!closed) {
                throw Error(ErrorCode::MalformedCommand,
                            "unterminated double quote in command: " + std::string(line));
            }
        } else {
            current += c;
        }
    }
    if (in_word) {
        words.push_back(std::move(current));
    }
    return words;
}

CommandSpec resolve_command(const std::optional<Manifest> &manifest,
                            const std::optional<std::string> &cli_override)
{
    if (cli_override) {
        auto argv = split_command_line(*cli_override);
        if (argv.empty() || argv.front().empty()) {
            throw Error(ErrorCode::EmptyCommand, "--command is empty");
        }
        return {std::move(argv), CommandSource::CliOverride};
    }
    if (manifest && manifest->command) {
        auto argv = split_command_line(*manifest->command);
        if (argv.empty() || argv.front().empty()) {
            throw Error(ErrorCode::EmptyCommand, "manifest [Core] command is empty");
        }
        return {std::move(argv), CommandSource::Manifest};
    }
    return {default_shell_argv(), CommandSource::DefaultShell};
}

} // namespace runtimebox
