// Copyright 2026 the vsm-alloc authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "support.hpp"

namespace vsmalloc {
namespace {

namespace fs = std::filesystem;

struct Result {
    int code = -1;
    std::string out;
};

// Runs the CLI with stderr discarded and returns stdout and the exit code.
Result cli(const std::string& args) {
    const std::string command = std::string("\"") + VSMALLOC_CLI_PATH + "\" " + args + " 2>/dev/null";
    Result r;
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) return r;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
    const int status = pclose(pipe);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

const std::string kCase = "--case \"" + testing::case_path() + "\"";

TEST(Cli, OptimizeSucceedsAndWritesBundle) {
    const fs::path dir = fs::temp_directory_path() / "vsmalloc_cli_opt";
    fs::remove_all(dir);
    const auto r = cli("optimize " + kCase + " --method uniform --out \"" + dir.string() + "\"");
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("\"zeta_min\""), std::string::npos);
    EXPECT_TRUE(fs::exists(dir / "metrics.json"));
    fs::remove_all(dir);
}

TEST(Cli, InputErrorsExitThree) {
    EXPECT_EQ(cli("analyze --case /nonexistent.json").code, 3);
    EXPECT_EQ(cli("optimize " + kCase + " --method sideways --out /tmp/x").code, 3);
    EXPECT_EQ(cli("analyze " + kCase + " --variant mystery").code, 3);
    EXPECT_EQ(cli("bogus-subcommand").code, 3);
}

TEST(Cli, UnwritableOutputExitsThree) {
    const fs::path blocker = fs::temp_directory_path() / "vsmalloc_cli_blocker";
    { std::ofstream(blocker) << "x"; }
    const auto r = cli("optimize " + kCase + " --method uniform --max-iterations 2 --out \"" + (blocker / "out").string() + "\"");
    EXPECT_EQ(r.code, 3);
    fs::remove(blocker);
}

TEST(Cli, IterationCapExitsTwo) {
    const fs::path dir = fs::temp_directory_path() / "vsmalloc_cli_cap";
    fs::remove_all(dir);
    EXPECT_EQ(cli("optimize " + kCase + " --method multistep --max-iterations 2 --out \"" + dir.string() + "\"").code, 2);
    fs::remove_all(dir);
}

TEST(Cli, AnalyzeReportsLowDamping) {
    const auto r = cli("analyze " + kCase);
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("zeta_min below floor"), std::string::npos) << r.out;
}

TEST(Cli, NormsAndSimulate) {
    const auto n = cli("norms " + kCase);
    EXPECT_EQ(n.code, 0);
    EXPECT_EQ(n.out.rfind("stable ", 0), 0u) << n.out;
    const auto s = cli("simulate " + kCase + " --dP 0.1 --horizon 1 --dt 0.01");
    EXPECT_EQ(s.code, 0);
    EXPECT_EQ(s.out.rfind("t,w_bus1,", 0), 0u);
    EXPECT_EQ(std::count(s.out.begin(), s.out.end(), '\n'), 102);
}

TEST(Cli, IdenticalInvocationsGiveIdenticalBytes) {
    const fs::path a = fs::temp_directory_path() / "vsmalloc_cli_det_a";
    const fs::path b = fs::temp_directory_path() / "vsmalloc_cli_det_b";
    fs::remove_all(a);
    fs::remove_all(b);
    const std::string args = "optimize " + kCase + " --variant no_inertia --method multistep --out ";
    const auto ra = cli(args + "\"" + a.string() + "\"");
    const auto rb = cli(args + "\"" + b.string() + "\"");
    EXPECT_EQ(ra.out, rb.out);
    for (const auto& entry : fs::directory_iterator(a)) {
        EXPECT_EQ(slurp(entry.path()), slurp(b / entry.path().filename())) << entry.path().filename();
    }
    const auto ta = cli("trace-export " + kCase + " --method uniform");
    const auto tb = cli("trace-export " + kCase + " --method uniform");
    EXPECT_FALSE(ta.out.empty());
    EXPECT_EQ(ta.out, tb.out);
    fs::remove_all(a);
    fs::remove_all(b);
}

}  // namespace
}  // namespace vsmalloc
