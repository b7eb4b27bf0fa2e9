/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

#include "runtimebox/cli.hpp"

#include "runtimebox/casstore.hpp"
#include "runtimebox/deploy.hpp"
#include "runtimebox/error.hpp"
#include "runtimebox/packager.hpp"
#include "runtimebox/paths.hpp"
#include "runtimebox/remote.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <iomanip>
#include <iostream>

#ifndef RUNTIMEBOX_CLI_NAME
#define RUNTIMEBOX_CLI_NAME "maps"
#endif
#ifndef RUNTIMEBOX_VERSION
#define RUNTIMEBOX_VERSION "0.1.0"
#endif

namespace runtimebox::cli {

namespace {

constexpr std::string_view program = RUNTIMEBOX_CLI_NAME;

const std::string subcommand_footer =
    "Subcommand usage:\n"
    "  package --initialise PATH       prepare a root tree for authoring\n"
    "  package --sandbox PATH          open a writable sandbox inside the tree\n"
    "          [--command CMD] [--bind HOST:RUNTIME[:ro]]...\n"
    "  package --commit REF PATH       commit the tree as runtime REF\n"
    "  remote add NAME URL             configure a remote repository\n"
    "  remote list                     show configured remotes\n"
    "  repo export PATH [--remote NAME]\n"
    "                                  write a static copy of the repository\n"
    "  repo fsck                       verify every stored object\n"
    "\n"
    "REF is name/arch/version; version may be 'latest'.\n"
    "Exit status: 0 success, 1 usage error, 2 environment error; -r passes\n"
    "the runtime command's own status through.\n";

struct Raw {
    std::string deploy;
    std::string run;
    std::string update;
    std::string reset;
    std::string remove;
    bool list{false};
    std::string command;
    std::vector<std::string> binds;
    bool dry_run{false};
    bool json{false};
    std::string remote;

    std::string initialise;
    std::string sandbox;
    std::vector<std::string> commit;

    std::string remote_name;
    std::string remote_url;
    std::string export_path;
};

struct App {
    CLI::App app{"Deploy, run and author portable software runtimes.", std::string(program)};
    CLI::App *package{nullptr};
    CLI::App *remote{nullptr};
    CLI::App *remote_add{nullptr};
    CLI::App *remote_list{nullptr};
    CLI::App *repo{nullptr};
    CLI::App *repo_export{nullptr};
    CLI::App *repo_fsck{nullptr};
    CLI::Option *command{nullptr};
    CLI::Option *bind{nullptr};
    CLI::Option *dry_run{nullptr};
    CLI::Option *json{nullptr};
    CLI::Option *remote_opt{nullptr};
};

void build(App &a, Raw &r)
{
    auto &app = a.app;
    app.set_version_flag("--version", std::string(program) + " " + RUNTIMEBOX_VERSION);
    app.footer(subcommand_footer);
    app.add_option("-d,--deploy", r.deploy, "Download and deploy runtime REF")->type_name("REF");
    app.add_option("-r,--run", r.run, "Run deployed runtime REF")->type_name("REF");
    app.add_option("--update", r.update, "Update deployment REF to the newest published commit")->type_name("REF");
    app.add_option("--reset", r.reset, "Discard all changes made inside deployment REF")->type_name("REF");
    app.add_flag("--list", r.list, "List deployments");
    app.add_option("--remove", r.remove, "Delete deployment REF")->type_name("REF");
    a.command = app.add_option("--command", r.command, "With -r: run CMD instead of the manifest command")
                    ->type_name("CMD");
    a.bind = app.add_option("--bind", r.binds, "With -r: also mount HOST at RUNTIME (append :ro for read-only)")
                 ->type_name("HOST:RUNTIME")
                 ->allow_extra_args(false);
    a.dry_run = app.add_flag("--dry-run", r.dry_run, "With -r: print the execution plan instead of running");
    a.json = app.add_flag("--json", r.json, "Machine-readable output for --list and --dry-run");
    a.remote_opt = app.add_option("--remote", r.remote, "Remote to use for -d, --update and repo export")
                       ->type_name("NAME");

    a.package = app.add_subcommand("package", "Author runtimes");
    a.package->fallthrough();
    a.package->add_option("--initialise", r.initialise, "Prepare the root tree at PATH")->type_name("PATH");
    a.package->add_option("--sandbox", r.sandbox, "Open a writable sandbox inside the tree at PATH")
        ->type_name("PATH");
    a.package->add_option("--commit", r.commit, "Commit the tree at PATH as runtime REF")
        ->type_name("REF PATH")
        ->expected(2);

    a.remote = app.add_subcommand("remote", "Manage remotes");
    a.remote->require_subcommand(1);
    a.remote_add = a.remote->add_subcommand("add", "Configure a remote");
    a.remote_add->add_option("name", r.remote_name)->required();
    a.remote_add->add_option("url", r.remote_url)->required();
    a.remote_list = a.remote->add_subcommand("list", "Show configured remotes");

    a.repo = app.add_subcommand("repo", "Repository maintenance");
    a.repo->require_subcommand(1);
    a.repo->fallthrough();
    a.repo_export = a.repo->add_subcommand("export", "Write a static, servable copy of the repository");
    a.repo_export->fallthrough();
    a.repo_export->add_option("path", r.export_path)->required();
    a.repo_fsck = a.repo->add_subcommand("fsck", "Verify every stored object");
}

[[noreturn]] void usage(const std::string &message)
{
    throw Error(ErrorCode::UsageError, message + " (see --help)");
}

std::string one_line(std::string s)
{
    for (auto &c : s) {
        if (c == '\n' || c == '\r') {
            c = ' ';
        }
    }
    return s;
}

Repo open_repo()
{
    return Repo::init(default_repo_path());
}

DeployOptions deploy_options(const Invocation &inv)
{
    DeployOptions o;
    o.remote = inv.remote;
    return o;
}

std::string yes_no(bool b)
{
    return b ? "yes" : "no";
}

} // namespace

std::string_view action_name(Action action) noexcept
{
    switch (action) {
    case Action::Help: return "help";
    case Action::Version: return "version";
    case Action::Deploy: return "deploy";
    case Action::Run: return "run";
    case Action::Update: return "update";
    case Action::Reset: return "reset";
    case Action::List: return "list";
    case Action::Remove: return "remove";
    case Action::PackageInitialise: return "package-initialise";
    case Action::PackageSandbox: return "package-sandbox";
    case Action::PackageCommit: return "package-commit";
    case Action::RemoteAdd: return "remote-add";
    case Action::RemoteList: return "remote-list";
    case Action::RepoExport: return "repo-export";
    case Action::RepoFsck: return "repo-fsck";
    }
    return "unknown";
}

std::string help_text()
{
    App a;
    Raw r;
    build(a, r);
    return a.app.help();
}

Invocation parse_invocation(const std::vector<std::string> &args)
{
    App a;
    Raw r;
    build(a, r);
    Invocation inv;
    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        a.app.parse(reversed);
    } catch (const CLI::CallForHelp &) {
        inv.action = Action::Help;
        inv.text = a.app.help();
        return inv;
    } catch (const CLI::CallForAllHelp &) {
        inv.action = Action::Help;
        inv.text = a.app.help("", CLI::AppFormatMode::All);
        return inv;
    } catch (const CLI::CallForVersion &e) {
        inv.action = Action::Version;
        inv.text = std::string(program) + " " + RUNTIMEBOX_VERSION + "\n";
        return inv;
    } catch (const CLI::ParseError &e) {
        usage(one_line(e.what()));
    }

    std::vector<std::pair<Action, std::string>> modes;
    auto top = [&](Action act, const std::string &value, const char *flag) {
        if (a.app.count(flag) > 1) {
            usage(std::string(flag) + " given more than once");
        }
        if (a.app.count(flag) == 1) {
            modes.emplace_back(act, value);
        }
    };
    top(Action::Deploy, r.deploy, "--deploy");
    top(Action::Run, r.run, "--run");
    top(Action::Update, r.update, "--update");
    top(Action::Reset, r.reset, "--reset");
    top(Action::Remove, r.remove, "--remove");
    if (r.list) {
        modes.emplace_back(Action::List, "");
    }
    if (a.package->parsed()) {
        int n = 0;
        if (a.package->count("--initialise")) {
            modes.emplace_back(Action::PackageInitialise, r.initialise);
            ++n;
        }
        if (a.package->count("--sandbox")) {
            modes.emplace_back(Action::PackageSandbox, r.sandbox);
            ++n;
        }
        if (a.package->count("--commit")) {
            modes.emplace_back(Action::PackageCommit, "");
            ++n;
        }
        if (n == 0) {
            usage("package needs one of --initialise, --sandbox or --commit");
        }
    }
    if (a.remote_add->parsed()) {
        modes.emplace_back(Action::RemoteAdd, "");
    }
    if (a.remote_list->parsed()) {
        modes.emplace_back(Action::RemoteList, "");
    }
    if (a.repo_export->parsed()) {
        modes.emplace_back(Action::RepoExport, r.export_path);
    }
    if (a.repo_fsck->parsed()) {
        modes.emplace_back(Action::RepoFsck, "");
    }

    if (modes.empty()) {
        if (a.command->count() || a.bind->count() || a.dry_run->count() || a.json->count() ||
            a.remote_opt->count()) {
            usage("no action given");
        }
        inv.action = Action::Help;
        inv.text = a.app.help();
        return inv;
    }
    if (modes.size() > 1) {
        std::string names;
        for (const auto &[act, v] : modes) {
            names += names.empty() ? "" : ", ";
            names += action_name(act);
        }
        usage("conflicting actions: " + names);
    }

    auto [action, value] = modes.front();
    inv.action = action;
    switch (action) {
    case Action::Deploy:
    case Action::Run:
    case Action::Update:
    case Action::Reset:
    case Action::Remove:
        inv.ref = parse_runtime_ref(value);
        break;
    case Action::PackageInitialise:
    case Action::PackageSandbox:
    case Action::RepoExport:
        inv.path = value;
        break;
    case Action::PackageCommit:
        inv.ref = parse_runtime_ref(r.commit.at(0));
        inv.path = r.commit.at(1);
        break;
    case Action::RemoteAdd:
        inv.name = r.remote_name;
        inv.url = r.remote_url;
        break;
    default:
        break;
    }

    bool runs = action == Action::Run || action == Action::PackageSandbox;
    if (!runs && (a.command->count() || a.bind->count())) {
        usage("--command and --bind only apply to -r/--run and package --sandbox");
    }
    if (action != Action::Run && r.dry_run) {
        usage("--dry-run only applies to -r/--run");
    }
    if (r.json && action != Action::List && !(action == Action::Run && r.dry_run)) {
        usage("--json only applies to --list and --dry-run");
    }
    if (a.remote_opt->count() && action != Action::Deploy && action != Action::Update &&
        action != Action::RepoExport) {
        usage("--remote only applies to -d/--deploy, --update and repo export");
    }
    if (a.command->count()) {
        inv.command = r.command;
    }
    for (const auto &b : r.binds) {
        inv.binds.push_back(parse_bind(b));
    }
    inv.dry_run = r.dry_run;
    inv.json = r.json;
    if (a.remote_opt->count()) {
        inv.remote = r.remote;
    }
    return inv;
}

Invocation parse_command_line(std::string_view line)
{
    auto words = split_command_line(line);
    if (words.empty()) {
        usage("empty command line");
    }
    words.erase(words.begin());
    return parse_invocation(words);
}

int exit_code_for(ErrorCode code) noexcept
{
    return is_environment_error(code) ? 2 : 1;
}

std::string diagnostic(const std::exception &e)
{
    if (auto *err = dynamic_cast<const Error *>(&e)) {
        return std::string(program) + ": " + std::string(error_name(err->code())) + ": " + one_line(err->what());
    }
    if (dynamic_cast<const fs::filesystem_error *>(&e)) {
        return std::string(program) + ": IoError: " + one_line(e.what());
    }
    return std::string(program) + ": InternalError: " + one_line(e.what());
}

int execute(const Invocation &inv, std::ostream &out, std::ostream &err)
{
    (void)err;
    auto state_root = default_state_root();
    switch (inv.action) {
    case Action::Help:
    case Action::Version:
        out << inv.text;
        return 0;
    case Action::Deploy: {
        auto repo = open_repo();
        auto d = deploy(repo, state_root, *inv.ref, deploy_options(inv));
        out << "Deployed " << format_runtime_ref(d.ref());
        if (d.state().resolved != d.ref()) {
            out << " (" << format_runtime_ref(d.state().resolved) << ")";
        }
        out << " at commit " << d.commit().short_hex() << "\n";
        return 0;
    }
    case Action::Run: {
        auto d = load_deployment(state_root, *inv.ref);
        RunOptions o;
        o.command = inv.command;
        o.binds = inv.binds;
        if (inv.dry_run) {
            auto plan = plan_run(d, o);
            out << (inv.json ? plan_to_json(plan) : serialize_plan(plan));
            return 0;
        }
        out.flush();
        return run(d, o);
    }
    case Action::Update: {
        auto repo = open_repo();
        auto before = load_deployment(state_root, *inv.ref).commit();
        auto d = update(repo, state_root, *inv.ref, deploy_options(inv));
        if (d.commit() == before) {
            out << format_runtime_ref(d.ref()) << " is up to date at commit " << d.commit().short_hex() << "\n";
        } else {
            out << "Updated " << format_runtime_ref(d.ref()) << " from " << before.short_hex() << " to "
                << d.commit().short_hex() << "\n";
        }
        return 0;
    }
    case Action::Reset:
        reset(state_root, *inv.ref);
        out << "Reset " << format_runtime_ref(*inv.ref) << "\n";
        return 0;
    case Action::Remove:
        remove_deployment(state_root, *inv.ref);
        out << "Removed " << format_runtime_ref(*inv.ref) << "\n";
        return 0;
    case Action::List: {
        auto all = list_deployments(state_root);
        if (inv.json) {
            auto j = nlohmann::ordered_json::array();
            for (const auto &info : all) {
                j.push_back({{"ref", format_runtime_ref(info.ref)},
                             {"commit", info.commit.hex()},
                             {"pristine", info.pristine}});
            }
            out << j.dump(2) << "\n";
            return 0;
        }
        std::size_t width = 3;
        for (const auto &info : all) {
            width = std::max(width, format_runtime_ref(info.ref).size());
        }
        out << std::left << std::setw(static_cast<int>(width)) << "REF" << "  " << std::setw(12) << "COMMIT"
            << "  PRISTINE\n";
        for (const auto &info : all) {
            out << std::setw(static_cast<int>(width)) << format_runtime_ref(info.ref) << "  " << std::setw(12)
                << info.commit.short_hex() << "  " << yes_no(info.pristine) << "\n";
        }
        return 0;
    }
    case Action::PackageInitialise:
        initialise(inv.path);
        out << "Initialised " << inv.path.string() << "\n";
        return 0;
    case Action::PackageSandbox: {
        RunOptions o;
        o.command = inv.command;
        o.binds = inv.binds;
        out.flush();
        return author_sandbox(inv.path, o);
    }
    case Action::PackageCommit: {
        auto repo = open_repo();
        auto id = commit_runtime(repo, *inv.ref, inv.path);
        out << "Committed " << format_runtime_ref(*inv.ref) << " as " << id.hex() << "\n";
        return 0;
    }
    case Action::RemoteAdd: {
        auto repo = open_repo();
        add_remote(repo, inv.name, inv.url);
        return 0;
    }
    case Action::RemoteList: {
        auto repo = open_repo();
        for (const auto &r : list_remotes(repo)) {
            out << r.name << "\t" << r.url << "\n";
        }
        return 0;
    }
    case Action::RepoExport: {
        auto repo = open_repo();
        export_repo(repo, inv.path, {.remote = inv.remote.value_or("")});
        out << "Exported to " << inv.path.string() << "\n";
        return 0;
    }
    case Action::RepoFsck: {
        auto repo = open_repo();
        auto report = repo.fsck();
        out << report.summary();
        if (!report.summary().empty() && report.summary().back() != '\n') {
            out << "\n";
        }
        if (!report.clean()) {
            throw Error(ErrorCode::FsckFailed, "repository has " +
                                                   std::to_string(report.digest_mismatches.size() +
                                                                  report.dangling.size()) +
                                                   " problem(s)");
        }
        return 0;
    }
    }
    return 1;
}

int main(int argc, char **argv, std::ostream &out, std::ostream &err)
{
    std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
    try {
        return execute(parse_invocation(args), out, err);
    } catch (const Error &e) {
        err << diagnostic(e) << "\n";
        return exit_code_for(e.code());
    } catch (const std::exception &e) {
        err << diagnostic(e) << "\n";
        return 2;
    }
}

} // namespace runtimebox::cli
