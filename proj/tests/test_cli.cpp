#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "mstream/cli.hpp"
#include "mstream/config.hpp"
#include "mstream/motion_io.hpp"
#include "mstream/protocol.hpp"
#include "transcript.hpp"

using namespace mstream;
namespace fs = std::filesystem;

namespace {

struct Run {
    int rc;
    std::string out;
    std::string err;
};

Run cli(std::vector<std::string> args) {
    args.insert(args.begin(), "mstream");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {rc, out.str(), err.str()};
}

struct TempDir {
    TempDir() : path(fs::temp_directory_path() / ("mstream_cli_" + std::to_string(::getpid()))) {
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
    fs::path path;
};

const std::vector<std::string> kSmall{"--set", "backend.frame_width=12", "--set", "backend.joint_count=4",
                                      "--set", "backend.channels=8",     "--set", "backend.style_dim=4"};

std::vector<std::string> with(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("identity stylize reproduces the input's joints") {
    TempDir dir;
    write_motion_file(dir.file("in.motion"), testutil::random_motion(100, 12, 1), 4);
    const Run r = cli(with({"stylize", "--input", dir.file("in.motion"), "--out", dir.file("out.joints"),
                            "--features-out", dir.file("out.motion"), "--set", "backend.name=\"toy-identity\"",
                            "--set", "pipeline.alpha=1"},
                           kSmall));
    REQUIRE_MESSAGE(r.rc == 0, r.err);
    CHECK(r.out.find("frames out    100") != std::string::npos);
    ToyOptions o;
    o.frame_width = 12;
    o.joint_count = 4;
    o.style_dim = 4;
    const auto backend = make_backend(BackendSpec{"toy-identity", o, {}});
    const auto expected = backend->features_to_joints(testutil::random_motion(100, 12, 1));
    const JointsFile got = read_joints_file(dir.file("out.joints"));
    CHECK(got.joints == expected);
    CHECK(got.warmup_frames == 60);
    CHECK(read_motion_file(dir.file("out.motion")).motion == testutil::random_motion(100, 12, 1));
}

TEST_CASE("stylize output is byte-identical across runs and depends on the seed") {
    TempDir dir;
    write_motion_file(dir.file("in.motion"), testutil::random_motion(90, 12, 2));
    auto run = [&](const std::string& out, const std::string& seed) {
        const Run r = cli(with({"stylize", "--input", dir.file("in.motion"), "--out", dir.file(out), "--seed", seed,
                                "--set", "backend.noise=0.1", "--style-name", "brisk"},
                               kSmall));
        REQUIRE_MESSAGE(r.rc == 0, r.err);
        return testutil::read_text(dir.file(out));
    };
    const std::string a = run("a.joints", "7");
    CHECK(a == run("b.joints", "7"));
    CHECK(a != run("c.joints", "8"));
}

TEST_CASE("structured stylize report and every mode runs") {
    TempDir dir;
    write_motion_file(dir.file("in.motion"), testutil::random_motion(70, 12, 3));
    write_motion_file(dir.file("one_window.motion"), testutil::random_motion(60, 12, 3));
    for (const char* mode : {"proposed", "naive", "offline", "no_reencode", "noncausal"}) {
        const bool offline = std::string(mode) == "offline";
        const Run r = cli(with({"stylize", "--input", dir.file(offline ? "one_window.motion" : "in.motion"), "--out",
                                dir.file("o.joints"), "--mode", mode, "--format", "structured"},
                               kSmall));
        REQUIRE_MESSAGE(r.rc == 0, r.err);
        const auto j = nlohmann::json::parse(r.out);
        CHECK(j["mode"] == mode);
        // 70 frames: the first stride emits 60, then two more strides of 4.
        CHECK(j["frames_out"] == (offline ? 60 : 68));
        CHECK(j["strides"] == (offline ? 1 : 3));
    }
    // offline is a single pass bounded by the backend's max window
    CHECK(cli(with({"stylize", "--input", dir.file("in.motion"), "--out", dir.file("o.joints"), "--mode", "offline"},
                   kSmall))
              .rc == 3);
}

TEST_CASE("usage and config errors exit 2") {
    TempDir dir;
    write_motion_file(dir.file("in.motion"), testutil::random_motion(70, 12, 3));
    CHECK(cli({}).rc == 2);
    CHECK(cli({"dance"}).rc == 2);
    CHECK(cli({"stylize", "--input", dir.file("in.motion")}).rc == 2);
    CHECK(cli(with({"bench", "--frames", "30"}, kSmall)).rc == 2);
    const Run bad = cli(with({"bench", "--set", "pipeline.stride=40"}, kSmall));
    CHECK(bad.rc == 2);
    CHECK(bad.err.find("re-encode") != std::string::npos);
    CHECK(cli(with({"bench", "--set", "pipeline.colour=1"}, kSmall)).rc == 2);
    CHECK(cli({"bench", "--config", dir.file("missing.json")}).rc == 2);
    std::ofstream(dir.file("broken.json")) << "{ nope";
    CHECK(cli({"bench", "--config", dir.file("broken.json")}).rc == 2);
    CHECK(cli(with({"bench", "--set", "backend.name=\"gpu\""}, kSmall)).rc == 2);
    CHECK(cli(with({"stylize", "--input", dir.file("in.motion"), "--out", dir.file("o"), "--style-vec", "1,2"}, kSmall))
              .rc == 2);
    CHECK(cli(with({"stylize", "--input", dir.file("in.motion"), "--out", dir.file("o"), "--style-name", "x"}, kSmall))
              .rc == 2);
    CHECK(cli({"serve", "--listen", "nowhere"}).rc == 2);
}

TEST_CASE("--set wins over the environment, --seed over both") {
    TempDir dir;
    write_motion_file(dir.file("in.motion"), testutil::random_motion(70, 12, 3));
    auto run = [&](const std::string& out, std::vector<std::string> extra) {
        std::vector<std::string> args{"stylize", "--input", dir.file("in.motion"), "--out", dir.file(out),
                                      "--set",   "backend.noise=0.1"};
        args.insert(args.end(), extra.begin(), extra.end());
        REQUIRE(cli(with(args, kSmall)).rc == 0);
        return testutil::read_text(dir.file(out));
    };
    const std::string seed5 = run("a", {"--set", "backend.seed=5", "--set", "pipeline.seed=5"});
    const std::string seed9 = run("b", {"--seed", "9"});
    ::setenv("MSTREAM_SEED", "9", 1);
    CHECK(run("c", {"--set", "backend.seed=5", "--set", "pipeline.seed=5"}) == seed5);
    CHECK(run("d", {}) == seed9);
    ::setenv("MSTREAM_SEED", "1", 1);
    CHECK(run("e", {"--set", "backend.seed=5", "--seed", "9"}) == seed9);
    ::unsetenv("MSTREAM_SEED");
}

TEST_CASE("data errors exit 3") {
    TempDir dir;
    CHECK(cli(with({"stylize", "--input", dir.file("none.motion"), "--out", dir.file("o")}, kSmall)).rc == 3);
    std::ofstream(dir.file("bad.motion")) << "{\"kind\":\"motion\",\"d\":12,\"frame_count\":1}\n1 2 3\n";
    const Run r = cli(with({"stylize", "--input", dir.file("bad.motion"), "--out", dir.file("o")}, kSmall));
    CHECK(r.rc == 3);
    CHECK(r.err.find("line 2") != std::string::npos);
    write_motion_file(dir.file("wide.motion"), testutil::random_motion(70, 13, 3));
    CHECK(cli(with({"stylize", "--input", dir.file("wide.motion"), "--out", dir.file("o")}, kSmall)).rc == 3);
    write_motion_file(dir.file("short.motion"), testutil::random_motion(10, 12, 3));
    CHECK(cli(with({"stylize", "--input", dir.file("short.motion"), "--out", dir.file("o")}, kSmall)).rc == 3);
    CHECK(cli({"jitter", "--inputs", dir.file("*.nothing")}).rc == 3);
    write_joints_file(dir.file("two.joints"), testutil::random_joints(2, 1, 1));
    CHECK(cli({"jitter", "--inputs", dir.file("two.joints")}).rc == 3);
}

TEST_CASE("jitter command on the quadratic fixture") {
    TempDir dir;
    write_joints_file(dir.file("q.joints"), testutil::quadratic_joints());
    const Run r = cli({"jitter", "--inputs", dir.file("q.joints")});
    REQUIRE_MESSAGE(r.rc == 0, r.err);
    CHECK(r.out.find("jitter  3.46410161514") != std::string::npos);
    const Run s = cli({"jitter", "--inputs", dir.file("*.joints"), "--format", "structured"});
    const auto j = nlohmann::json::parse(s.out);
    CHECK(j["N"] == 2);
    CHECK(std::abs(j["jitter"].get<double>() - 3.4641) < 1e-4);
    // warm-up frames recorded in the header are skipped unless asked for
    write_joints_file(dir.file("w.joints"), testutil::quadratic_joints(), 1);
    CHECK(nlohmann::json::parse(cli({"jitter", "--inputs", dir.file("w.joints"), "--format", "structured"}).out)["N"] ==
          1);
    CHECK(nlohmann::json::parse(cli({"jitter", "--inputs", dir.file("w.joints"), "--format", "structured",
                                     "--include-warmup"})
                                    .out)["N"] == 2);
}

TEST_CASE("bench, synth and export-toy") {
    TempDir dir;
    const Run b = cli(with({"bench", "--frames", "80", "--steps", "2", "--format", "structured"}, kSmall));
    REQUIRE_MESSAGE(b.rc == 0, b.err);
    const auto j = nlohmann::json::parse(b.out);
    CHECK(j["strides"] == 6);
    CHECK(j["stage_ms"].contains("denoise"));
    CHECK(j["strides_per_sec"].get<double>() > 0);

    REQUIRE(cli({"synth", "--frames", "50", "--width", "12", "--seed", "4", "--out", dir.file("s.motion")}).rc == 0);
    CHECK(read_motion_file(dir.file("s.motion")).motion.size() == 50);

    REQUIRE(cli(with({"export-toy", "--out", dir.file("w.json")}, kSmall)).rc == 0);
    // Loading the exported weights reproduces the toy backend's output.
    write_motion_file(dir.file("in.motion"), testutil::random_motion(70, 12, 5));
    REQUIRE(cli(with({"stylize", "--input", dir.file("in.motion"), "--out", dir.file("a.joints")}, kSmall)).rc == 0);
    const Run r = cli(with({"stylize", "--input", dir.file("in.motion"), "--out", dir.file("b.joints"), "--set",
                            "backend.name=\"linear-file\"", "--set", "backend.weights=\"" + dir.file("w.json") + "\""},
                           kSmall));
    REQUIRE_MESSAGE(r.rc == 0, r.err);
    CHECK(testutil::read_text(dir.file("a.joints")) == testutil::read_text(dir.file("b.joints")));
}

TEST_CASE("serve stops cleanly on SIGTERM") {
    int out_pipe[2];
    REQUIRE(::pipe(out_pipe) == 0);
    const pid_t pid = ::fork();
    REQUIRE(pid >= 0);
    if (pid == 0) {
        ::dup2(out_pipe[1], 1);
        ::close(out_pipe[0]);
        ::execl(MSTREAM_BINARY, MSTREAM_BINARY, "serve", "--listen", "127.0.0.1:0", "--set", "backend.frame_width=12",
                "--set", "backend.joint_count=4", static_cast<char*>(nullptr));
        ::_exit(127);
    }
    ::close(out_pipe[1]);
    std::string out;
    auto read_line = [&](const std::string& want) {
        char buf[4096];
        while (out.find(want) == std::string::npos) {
            pollfd p{out_pipe[0], POLLIN, 0};
            if (::poll(&p, 1, 10000) <= 0) return false;
            const ssize_t n = ::read(out_pipe[0], buf, sizeof(buf));
            if (n <= 0) return false;
            out.append(buf, static_cast<std::size_t>(n));
        }
        return true;
    };
    REQUIRE(read_line("\n"));
    REQUIRE(out.rfind("listening on 127.0.0.1:", 0) == 0);
    const int port = std::stoi(out.substr(out.rfind(':') + 1));

    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in a{};
    a.sin_family = AF_INET;
    a.sin_port = htons(static_cast<std::uint16_t>(port));
    ::inet_pton(AF_INET, "127.0.0.1", &a.sin_addr);
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&a), sizeof(a)) == 0);
    std::string msg = protocol::frame_payload(protocol::dump(protocol::make_hello_request(protocol::Json::object())));
    msg += protocol::frame_payload(protocol::dump(protocol::make_frame(0, std::vector<double>(12, 0.0))));
    REQUIRE(::send(fd, msg.data(), msg.size(), MSG_NOSIGNAL) == static_cast<ssize_t>(msg.size()));
    // Wait for the hello reply so the session exists before the signal.
    std::string reply;
    char buf[65536];
    while (reply.find("\"hello\"") == std::string::npos) {
        pollfd p{fd, POLLIN, 0};
        REQUIRE(::poll(&p, 1, 10000) > 0);
        const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        REQUIRE(n > 0);
        reply.append(buf, static_cast<std::size_t>(n));
    }
    ::kill(pid, SIGTERM);
    while (true) {
        pollfd p{fd, POLLIN, 0};
        if (::poll(&p, 1, 10000) <= 0) break;
        const ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        if (n <= 0) break;
        reply.append(buf, static_cast<std::size_t>(n));
    }
    ::close(fd);
    CHECK(reply.find("\"final\":true") != std::string::npos);
    CHECK(reply.find("{\"type\":\"end\"}") != std::string::npos);
    CHECK(read_line("stopped"));
    CHECK(out.find("session s1 closed: frames_in 1") != std::string::npos);
    int status = 0;
    ::waitpid(pid, &status, 0);
    ::close(out_pipe[0]);
    CHECK(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
}

}  // TEST_SUITE
