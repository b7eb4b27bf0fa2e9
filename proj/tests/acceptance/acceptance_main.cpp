/*
 * Copyright (C) 2026 The runtimebox authors
 *
 * SPDX-License-Identifier: Apache-2.0
 */

// Acceptance run: one PASS/FAIL/SKIP line per criterion. Exit status is 0
// only when nothing failed.

#include "runtimebox/casstore.hpp"
#include "runtimebox/cli.hpp"
#include "runtimebox/deploy.hpp"
#include "runtimebox/error.hpp"
#include "runtimebox/remote.hpp"
#include "runtimebox/sandbox.hpp"

#include "fixtures.hpp"
#include "static_server.hpp"
#include "support.hpp"

#include <signal.h>
#include <sys/stat.h>
#include <sys/sysmacros.h>
#include <sys/utsname.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

using namespace runtimebox;
using testsupport::TempDir;
using testsupport::write_file;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
    Status status{Status::Fail};
    std::string detail;
};

Outcome pass(std::string detail)
{
    return {Status::Pass, std::move(detail)};
}

Outcome fail(std::string detail)
{
    return {Status::Fail, std::move(detail)};
}

Outcome skip(std::string detail)
{
    return {Status::Skip, std::move(detail)};
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start)
{
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt_seconds(double s)
{
    std::ostringstream os;
    os.precision(2);
    os << std::fixed << s << "s";
    return os.str();
}

std::set<std::string> object_files(const fs::path &objects)
{
    std::set<std::string> out;
    for (const auto &e : fs::recursive_directory_iterator(objects)) {
        if (e.is_regular_file()) {
            out.insert(fs::relative(e.path(), objects).string());
        }
    }
    return out;
}

PullOptions quiet_pull()
{
    PullOptions o;
    o.sleep = [](std::chrono::milliseconds) {};
    return o;
}

void flip_bit(const fs::path &path, std::size_t byte, int bit)
{
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekg(static_cast<std::streamoff>(byte));
    char c = 0;
    f.read(&c, 1);
    c = static_cast<char>(c ^ (1 << bit));
    f.seekp(static_cast<std::streamoff>(byte));
    f.write(&c, 1);
}

std::optional<ObjectRef> object_from_path(const fs::path &objects, const fs::path &file)
{
    auto rel = fs::relative(file, objects);
    auto hex = rel.parent_path().string() + rel.stem().string();
    auto kind = object_kind_from_suffix(rel.extension().string().substr(1));
    auto id = ObjectId::try_from_hex(hex);
    if (!kind || !id) {
        return std::nullopt;
    }
    return ObjectRef{*id, *kind};
}

bool namespaces_ok(std::string &why)
{
    struct utsname u {};
    ::uname(&u);
    if (std::string_view(u.sysname) != "Linux") {
        why = "not a Linux host";
        return false;
    }
    try {
        check_kernel_support();
    } catch (const Error &e) {
        why = e.what();
        return false;
    }
    if (!testsupport::namespaces_available()) {
        why = "unprivileged user namespaces with overlay mounts are unavailable";
        return false;
    }
    return true;
}

HostContext host_at(const fs::path &home)
{
    HostContext h = HostContext::current();
    h.home = home;
    return h;
}

// ---- AC1 ----------------------------------------------------------------------

Outcome ac1_roundtrip()
{
    auto start = Clock::now();
    TempDir tmp{"rtbx-ac1"};
    auto repo = Repo::init(tmp / "repo");
    std::mt19937_64 rng(20240101);
    testsupport::RandomTreeParams params{.max_depth = 4, .max_entries = 50, .max_file_size = 64 * 1024};
    std::size_t diffs = 0;
    for (int i = 0; i < 200; ++i) {
        auto src = tmp / ("src" + std::to_string(i));
        auto dst = tmp / ("dst" + std::to_string(i));
        fs::create_directories(src);
        testsupport::make_random_tree(src, rng, params);
        auto tree = repo.store_tree(src);
        auto commit = repo.commit(tree, std::nullopt, "tree " + std::to_string(i), {}, i);
        repo.checkout(commit, dst, i % 2 ? CheckoutMode::Hardlink : CheckoutMode::Copy);
        auto d = testsupport::diff_trees(src, dst);
        if (!d.empty()) {
            std::cerr << "AC1 tree " << i << ": " << d.front() << "\n";
        }
        diffs += d.size();
        fs::remove_all(src);
        fs::remove_all(dst);
    }
    auto t = seconds_since(start);
    auto detail = "200 trees, " + std::to_string(diffs) + " differences, " + fmt_seconds(t);
    return diffs == 0 && t <= 60 ? pass(detail) : fail(detail + " (need 0 differences in <= 60s)");
}

// ---- AC2 ----------------------------------------------------------------------

Outcome ac2_dedup()
{
    auto start = Clock::now();
    TempDir tmp{"rtbx-ac2"};
    auto src = tmp / "src";
    fs::create_directories(src);
    std::string mib(1 << 20, '\0');
    std::mt19937_64 rng(7);
    for (auto &c : mib) {
        c = static_cast<char>(rng());
    }
    for (int i = 0; i < 100; ++i) {
        write_file(src / ("copy" + std::to_string(i)), mib);
    }
    auto repo = Repo::init(tmp / "repo");
    auto commit = repo.commit(repo.store_tree(src), std::nullopt, "dedup", {}, 0);

    std::size_t file_objects = 0;
    std::uintmax_t payload = 0;
    std::set<ino_t> object_inodes;
    for (const auto &ref : repo.list_objects()) {
        auto p = repo.object_path(ref);
        payload += fs::file_size(p);
        struct stat st {};
        ::stat(p.c_str(), &st);
        object_inodes.insert(st.st_ino);
        if (ref.kind == ObjectKind::File) {
            ++file_objects;
        }
    }

    auto out = tmp / "checkout";
    repo.checkout(commit, out, CheckoutMode::Hardlink);
    std::uintmax_t new_bytes = 0;
    struct stat root {};
    ::lstat(out.c_str(), &root);
    new_bytes += static_cast<std::uintmax_t>(root.st_blocks) * 512;
    for (const auto &e : fs::recursive_directory_iterator(out)) {
        struct stat st {};
        ::lstat(e.path().c_str(), &st);
        if (S_ISREG(st.st_mode) && object_inodes.count(st.st_ino)) {
            continue;
        }
        new_bytes += static_cast<std::uintmax_t>(st.st_blocks) * 512;
    }
    auto t = seconds_since(start);
    std::ostringstream d;
    d << file_objects << " file object(s), payload " << payload << " bytes, checkout added " << new_bytes
      << " bytes, " << fmt_seconds(t);
    bool ok = file_objects == 1 && payload < 1.2 * (1 << 20) && new_bytes < 64 * 1024 && t <= 10;
    return ok ? pass(d.str()) : fail(d.str() + " (need 1 object, < 1.2 MiB, < 64 KiB, <= 10s)");
}

// ---- AC3 ----------------------------------------------------------------------

Outcome ac3_bitflip()
{
    TempDir tmp{"rtbx-ac3"};
    fixtures::Publisher pub(tmp / "pub");
    RuntimeRef ref{"org.example.bitflip", "x86_64", "1.0"};
    auto tree = tmp / "tree";
    fs::create_directories(tree / "bin");
    fs::create_directories(tree / "share" / "doc");
    std::mt19937_64 rng(3);
    testsupport::make_random_tree(tree / "share", rng, {.max_depth = 3, .max_entries = 30, .max_file_size = 8192});
    write_file(tree / "bin" / "tool", "#!/bin/sh\necho tool\n", true);
    write_file(tree / "share" / "doc" / "README", "readme");
    pub.publish(ref, tree, 1);

    auto local_path = tmp / "local";
    auto local = Repo::init(local_path);
    RemoteConfig origin{"origin", pub.file_url()};
    pull(local, origin, ref, quiet_pull());
    auto local_objects = local_path / "objects";
    auto served_objects = pub.served() / "objects";
    std::vector<fs::path> local_files;
    for (const auto &f : object_files(local_objects)) {
        local_files.push_back(local_objects / f);
    }

    int fsck_hits = 0;
    int pull_hits = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto victim = local_files[rng() % local_files.size()];
        auto target = object_from_path(local_objects, victim);
        auto size = fs::file_size(victim);
        if (!target || size == 0) {
            continue;
        }
        auto original = testsupport::read_file(victim);
        auto byte = rng() % size;
        int bit = static_cast<int>(rng() % 8);
        fs::permissions(victim, fs::perms::owner_write, fs::perm_options::add);

        flip_bit(victim, byte, bit);
        auto report = local.fsck();
        if (report.dangling.empty() && report.digest_mismatches.size() == 1 &&
            report.digest_mismatches[0] == *target) {
            ++fsck_hits;
        } else {
            std::cerr << "AC3 trial " << trial << ": fsck reported " << report.summary() << "\n";
        }
        flip_bit(victim, byte, bit);

        // Same flip on the served copy; a pull into an empty repo must refuse it.
        auto served = served_objects / fs::relative(victim, local_objects);
        auto served_original = testsupport::read_file(served);
        fs::permissions(served, fs::perms::owner_write, fs::perm_options::add);
        flip_bit(served, byte, bit);
        auto fresh_path = tmp / ("fresh" + std::to_string(trial));
        auto fresh = Repo::init(fresh_path);
        bool raised = false;
        try {
            pull(fresh, origin, ref, quiet_pull());
        } catch (const Error &e) {
            raised = e.code() == ErrorCode::DigestMismatch;
        }
        if (raised && !fresh.has_object(target->id, target->kind) && fresh.fsck().clean() &&
            !fresh.read_ref(ref, "origin")) {
            ++pull_hits;
        } else {
            std::cerr << "AC3 trial " << trial << ": pull raised=" << raised << "\n";
        }
        write_file(served, served_original);
        fs::remove_all(fresh_path);
        if (testsupport::read_file(victim) != original) {
            return fail("could not restore object after trial " + std::to_string(trial));
        }
    }
    auto detail = "fsck detected " + std::to_string(fsck_hits) + "/100, pull refused " + std::to_string(pull_hits) +
                  "/100";
    return fsck_hits == 100 && pull_hits == 100 ? pass(detail) : fail(detail);
}

// ---- AC4 / AC5 fixtures ---------------------------------------------------------

struct Deployed {
    TempDir tmp{"rtbx-ovl"};
    fixtures::Publisher pub{tmp / "pub"};
    Repo repo = Repo::init(tmp / "repo");
    fs::path state = tmp / "state";
    fs::path home = tmp / "home";
    RuntimeRef ref{"org.example.overlay", "x86_64", "1.0"};
    std::optional<Deployment> d;

    Deployed()
    {
        auto rootfs = tmp / "rootfs";
        testsupport::make_fixture_rootfs(rootfs);
        write_file(rootfs / "data", "original data\n");
        write_file(rootfs / "gone", "about to be deleted\n");
        pub.publish(ref, rootfs, 1);
        add_remote(repo, "origin", pub.file_url());
        d = deploy(repo, state, ref);
        fs::create_directories(home);
    }

    int run_cmd(const std::string &command)
    {
        return run(*d, {.command = command, .host = host_at(home)});
    }

    // Hash of the merged view, computed in a child inside its own namespace.
    std::optional<ObjectId> merged_hash()
    {
        auto plan = plan_run(*d, {.host = host_at(home)});
        auto out = tmp / "merged.hash";
        int rc = testsupport::run_in_child([&] {
            enter_user_namespace();
            MountGuard guard(plan);
            write_file(out, repo.hash_tree(plan.merged).hex());
            return 0;
        });
        if (rc != 0) {
            return std::nullopt;
        }
        return ObjectId::try_from_hex(testsupport::read_file(out));
    }
};

Outcome ac4_overlay()
{
    std::string why;
    if (!namespaces_ok(why)) {
        return skip(why);
    }
    auto start = Clock::now();
    Deployed f;
    auto commit_tree = f.repo.read_commit(f.d->commit()).tree;
    auto rofs_before = f.repo.hash_tree(f.d->rofs());
    int rc = f.run_cmd("sh -c 'echo modified > /data && rm /gone && echo fresh > /created'");
    if (rc != 0) {
        return fail("probe command exited " + std::to_string(rc));
    }
    std::vector<std::string> problems;
    auto upper = f.d->rwfs();
    if (!fs::is_regular_file(upper / "data") || testsupport::read_file(upper / "data") != "modified\n") {
        problems.push_back("modified file was not copied up");
    }
    if (testsupport::read_file(f.d->rofs() / "data") != "original data\n") {
        problems.push_back("lower file changed");
    }
    struct stat st {};
    if (::lstat((upper / "gone").c_str(), &st) != 0 || !S_ISCHR(st.st_mode) || st.st_rdev != makedev(0, 0)) {
        problems.push_back("delete did not leave a whiteout");
    }
    if (!fs::exists(f.d->rofs() / "gone")) {
        problems.push_back("lower file was deleted");
    }
    if (!fs::is_regular_file(upper / "created")) {
        problems.push_back("new file missing from rwfs");
    }
    auto rofs_after = f.repo.hash_tree(f.d->rofs());
    if (rofs_after != rofs_before || rofs_after != commit_tree) {
        problems.push_back("rofs hash changed");
    }
    reset(f.state, f.ref);
    auto merged = f.merged_hash();
    if (!merged || *merged != rofs_after) {
        problems.push_back("merged view after reset differs from rofs");
    }
    auto t = seconds_since(start);
    if (t > 10) {
        problems.push_back("took " + fmt_seconds(t));
    }
    if (!problems.empty()) {
        std::string all;
        for (const auto &p : problems) {
            all += (all.empty() ? "" : "; ") + p;
        }
        return fail(all);
    }
    return pass("copy-up, whiteout 0/0, rofs " + rofs_after.short_hex() + " unchanged, reset merged == rofs, " +
                fmt_seconds(t));
}

Outcome ac5_persistence()
{
    std::string why;
    if (!namespaces_ok(why)) {
        return skip(why);
    }
    Deployed f;
    int r1 = f.run_cmd("sh -c 'echo kept > /home/runtime/state.txt'");
    int r2 = f.run_cmd("sh -c '[ \"$(cat /home/runtime/state.txt)\" = kept ]'");
    reset(f.state, f.ref);
    int r3 = f.run_cmd("sh -c '[ ! -e /home/runtime/state.txt ]'");
    auto detail = "run1=" + std::to_string(r1) + " run2(visible)=" + std::to_string(r2) +
                  " run3(after reset, absent)=" + std::to_string(r3);
    return r1 == 0 && r2 == 0 && r3 == 0 ? pass(detail) : fail(detail);
}

// ---- AC6 ----------------------------------------------------------------------

struct Cli {
    fs::path home;

    testsupport::ProcessResult operator()(const std::vector<std::string> &args) const
    {
        std::vector<std::string> argv{RTBX_CLI_PATH};
        argv.insert(argv.end(), args.begin(), args.end());
        return testsupport::run_process(argv, {{"HOME", home.string()},
                                               {"XDG_DATA_HOME", (home / ".local" / "share").string()}});
    }
};

Outcome ac6_workflow()
{
    std::string why;
    if (!namespaces_ok(why)) {
        return skip(why);
    }
    auto start = Clock::now();
    TempDir tmp{"rtbx-ac6"};
    Cli author{tmp / "author"};
    Cli user{tmp / "user"};
    fs::create_directories(author.home);
    fs::create_directories(user.home);
    auto tree = tmp / "tree";
    auto served = tmp / "served";
    testsupport::make_fixture_rootfs(tree);

    std::vector<std::string> log;
    auto step = [&](const Cli &who, const std::vector<std::string> &args) {
        auto r = who(args);
        std::string line;
        for (const auto &a : args) {
            line += (line.empty() ? "" : " ") + a;
        }
        if (r.exit_code != 0) {
            log.push_back("'" + line + "' exited " + std::to_string(r.exit_code) + ": " + r.err);
        }
        return r.exit_code == 0;
    };

    const std::string v1_bytes = "result computed by version 1\n";
    const std::string v2_bytes = "result computed by version 2\n";
    bool ok = step(author, {"package", "--initialise", tree.string()});
    ok = ok && step(author, {"package", "--sandbox", tree.string(), "--command",
                             "sh -c 'mkdir -p /opt/app && echo \"result computed by version 1\" > /opt/app/result'"});
    write_file(tree / "manifest.toml",
               "[Core]\ncommand = \"sh -c 'cp /opt/app/result /home/runtime/Public/result.txt'\"\n\n"
               "[Meta]\nProject = \"acceptance fixture\"\n");
    ok = ok && step(author, {"package", "--commit", "org.example.workflow/x86_64/1.0.0", tree.string()});
    ok = ok && step(author, {"repo", "export", served.string()});
    if (!ok) {
        return fail(log.front());
    }

    testsupport::StaticServer server(served);
    ok = step(user, {"remote", "add", "origin", server.url()});
    ok = ok && step(user, {"-d", "org.example.workflow/x86_64/latest"});
    ok = ok && step(user, {"-r", "org.example.workflow/x86_64/latest"});
    auto out = user.home / "Public" / "result.txt";
    bool v1_ok = ok && fs::exists(out) && testsupport::read_file(out) == v1_bytes;

    write_file(tree / "opt" / "app" / "result", v2_bytes);
    ok = ok && step(author, {"package", "--commit", "org.example.workflow/x86_64/2.0.0", tree.string()});
    ok = ok && step(author, {"repo", "export", served.string()});
    ok = ok && step(user, {"--update", "org.example.workflow/x86_64/latest"});
    ok = ok && step(user, {"-r", "org.example.workflow/x86_64/latest"});
    bool v2_ok = ok && fs::exists(out) && testsupport::read_file(out) == v2_bytes;

    auto t = seconds_since(start);
    if (!log.empty()) {
        return fail(log.front());
    }
    auto detail = std::string("package/export/serve/-d/-r/--update/-r all exit 0; v1 output ") +
                  (v1_ok ? "matches" : "DIFFERS") + ", v2 output " + (v2_ok ? "matches" : "DIFFERS") + ", " +
                  fmt_seconds(t);
    return v1_ok && v2_ok && t <= 30 ? pass(detail) : fail(detail + " (need <= 30s)");
}

// ---- AC7 ----------------------------------------------------------------------

Outcome ac7_resumable()
{
    TempDir tmp{"rtbx-ac7"};
    fixtures::Publisher pub(tmp / "pub");
    RuntimeRef ref{"org.example.resume", "x86_64", "1.0"};
    auto tree = tmp / "tree";
    fs::create_directories(tree);
    std::mt19937_64 rng(77);
    testsupport::make_random_tree(tree, rng, {.max_depth = 4, .max_entries = 50, .max_file_size = 16384});
    write_file(tree / "fixed", "always present");
    auto commit = pub.publish(ref, tree, 1);
    auto total = object_files(pub.served() / "objects").size();

    auto reference_path = tmp / "reference";
    auto reference = Repo::init(reference_path);
    std::size_t second_gets = 0;
    {
        testsupport::StaticServer server(pub.served());
        RemoteConfig origin{"origin", server.url()};
        pull(reference, origin, ref, quiet_pull());
        server.reset_counts();
        pull(reference, origin, ref, quiet_pull());
        second_gets = server.requests("/objects/");
    }
    auto expected = object_files(reference_path / "objects");

    int converged = 0;
    int killed = 0;
    for (int trial = 0; trial < 20; ++trial) {
        auto client_path = tmp / ("client" + std::to_string(trial));
        Repo::init(client_path);
        std::size_t kill_at = 1 + rng() % total;

        int go[2];
        if (::pipe(go) != 0) {
            return fail("pipe failed");
        }
        std::fflush(nullptr);
        pid_t pid = ::fork();
        if (pid == 0) {
            ::close(go[1]);
            char buf[128] = {};
            auto n = ::read(go[0], buf, sizeof buf - 1);
            if (n <= 0) {
                ::_exit(3);
            }
            try {
                auto client = Repo::open(client_path);
                pull(client, {"origin", std::string(buf, static_cast<std::size_t>(n))}, ref, quiet_pull());
            } catch (...) {
                ::_exit(4);
            }
            ::_exit(0);
        }
        ::close(go[0]);
        bool ok = true;
        {
            testsupport::StaticServer server(pub.served());
            std::atomic<std::size_t> seen{0};
            server.on_request([&](const std::string &path) {
                if (path.starts_with("/objects/") && ++seen == kill_at) {
                    ::kill(pid, SIGKILL);
                }
            });
            auto url = server.url();
            [[maybe_unused]] auto w = ::write(go[1], url.data(), url.size());
            ::close(go[1]);
            int status = 0;
            ::waitpid(pid, &status, 0);
            if (WIFSIGNALED(status)) {
                ++killed;
            }
            server.on_request({});
            auto client = Repo::open(client_path);
            ok = client.fsck().clean();
            try {
                ok = pull(client, {"origin", url}, ref, quiet_pull()) == commit && ok;
            } catch (const Error &e) {
                std::cerr << "AC7 trial " << trial << ": " << e.what() << "\n";
                ok = false;
            }
        }
        auto client = Repo::open(client_path);
        ok = ok && client.fsck().clean() && object_files(client_path / "objects") == expected;
        if (ok) {
            ++converged;
        } else {
            std::cerr << "AC7 trial " << trial << " (kill at object request " << kill_at << ") did not converge\n";
        }
        fs::remove_all(client_path);
    }
    auto detail = "second pull made " + std::to_string(second_gets) + " object GETs; " + std::to_string(converged) +
                  "/20 interrupted pulls converged (" + std::to_string(killed) + " killed mid-pull)";
    return second_gets == 0 && converged == 20 && killed == 20 ? pass(detail) : fail(detail);
}

// ---- AC8 ----------------------------------------------------------------------

const char *oscar_manifest = R"toml([Core]
command = "julia -J /tmp/jl_UuXQwY/Oscar.so --banner=no"

[Meta]
Project = "OSCAR -- Open Source Computer Algebra Research system, Version 1.0.0, The OSCAR Team, 2024. (https://www.oscar-system.org)"
URL = "https://www.oscar-system.org/"
)toml";

Outcome ac8_resolution()
{
    auto manifest = parse_manifest(oscar_manifest);
    std::vector<std::string> problems;
    auto expect = [&](const char *label, const CommandSpec &got, CommandSource source,
                      const std::vector<std::string> &argv) {
        if (got.source != source || got.argv != argv) {
            problems.push_back(label);
        }
    };
    expect("manifest, no override", resolve_command(manifest, std::nullopt), CommandSource::Manifest,
           {"julia", "-J", "/tmp/jl_UuXQwY/Oscar.so", "--banner=no"});
    expect("manifest, override", resolve_command(manifest, std::string("julia --version")),
           CommandSource::CliOverride, {"julia", "--version"});
    expect("no manifest, no override", resolve_command(std::nullopt, std::nullopt), CommandSource::DefaultShell,
           default_shell_argv());
    expect("no manifest, override", resolve_command(std::nullopt, std::string("sh -c 'echo hi'")),
           CommandSource::CliOverride, {"sh", "-c", "echo hi"});
    if (manifest.meta.at("Meta.URL") != "https://www.oscar-system.org/") {
        problems.push_back("Meta.URL");
    }
    if (!problems.empty()) {
        return fail("wrong result for: " + problems.front());
    }
    return pass("4/4 cases, OSCAR manifest argv = julia -J /tmp/jl_UuXQwY/Oscar.so --banner=no");
}

// ---- AC9 ----------------------------------------------------------------------

Outcome ac9_cli_parse()
{
    using cli::Action;
    struct Case {
        const char *line;
        Action action;
        const char *ref;
        const char *path;
    };
    const Case cases[] = {
        {"maps -d org.juliamath.accuratearithmetic/x86_64/papercorrectnessv3", Action::Deploy,
         "org.juliamath.accuratearithmetic/x86_64/papercorrectnessv3", nullptr},
        {"maps -r org.juliamath.accuratearithmetic/x86_64/papercorrectnessv3", Action::Run,
         "org.juliamath.accuratearithmetic/x86_64/papercorrectnessv3", nullptr},
        {"maps -d org.oscar_system.oscar/x86_64/latest", Action::Deploy, "org.oscar_system.oscar/x86_64/latest",
         nullptr},
        {"maps -r org.oscar_system.oscar/x86_64/latest", Action::Run, "org.oscar_system.oscar/x86_64/latest",
         nullptr},
        {"maps --update org.oscar_system.oscar/x86_64/latest", Action::Update,
         "org.oscar_system.oscar/x86_64/latest", nullptr},
        {"maps --deploy github.anantharaman.vibrant/x86_64/1.2.1", Action::Deploy,
         "github.anantharaman.vibrant/x86_64/1.2.1", nullptr},
        {"maps package --initialise /path/to/tree", Action::PackageInitialise, nullptr, "/path/to/tree"},
        {"maps package --sandbox /path/to/repository", Action::PackageSandbox, nullptr, "/path/to/repository"},
        {"maps package --commit name_of_repository/arch/version path/to/tree", Action::PackageCommit,
         "name_of_repository/arch/version", "path/to/tree"},
    };
    int good = 0;
    std::string first_bad;
    for (const auto &c : cases) {
        bool ok = false;
        try {
            auto inv = cli::parse_command_line(c.line);
            ok = inv.action == c.action;
            ok = ok && (c.ref ? inv.ref && format_runtime_ref(*inv.ref) == c.ref : !inv.ref);
            ok = ok && (c.path ? inv.path == c.path : inv.path.empty());
            ok = ok && !inv.command && inv.binds.empty() && !inv.dry_run;
        } catch (const std::exception &e) {
            std::cerr << "AC9 '" << c.line << "': " << e.what() << "\n";
        }
        if (ok) {
            ++good;
        } else if (first_bad.empty()) {
            first_bad = c.line;
        }
    }
    auto total = std::size(cases);
    auto detail = std::to_string(good) + "/" + std::to_string(total) + " invocations parsed to the intended action";
    return good == static_cast<int>(total) ? pass(detail) : fail(detail + "; first failure: " + first_bad);
}

} // namespace

int main()
{
    struct Criterion {
        const char *id;
        const char *title;
        Outcome (*fn)();
    };
    const Criterion criteria[] = {
        {"AC1", "round-trip fidelity", ac1_roundtrip},
        {"AC2", "deduplication", ac2_dedup},
        {"AC3", "bit-flip detection", ac3_bitflip},
        {"AC4", "overlay semantics", ac4_overlay},
        {"AC5", "persistence and reset", ac5_persistence},
        {"AC6", "end-to-end workflow", ac6_workflow},
        {"AC7", "pull idempotence and resumability", ac7_resumable},
        {"AC8", "command resolution matrix", ac8_resolution},
        {"AC9", "golden CLI parse", ac9_cli_parse},
    };
    int failures = 0;
    for (const auto &c : criteria) {
        Outcome o;
        try {
            o = c.fn();
        } catch (const std::exception &e) {
            o = fail(std::string("exception: ") + e.what());
        }
        const char *word = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
        if (o.status == Status::Fail) {
            ++failures;
        }
        std::cout << c.id << " " << word << "  " << c.title << ": " << o.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
