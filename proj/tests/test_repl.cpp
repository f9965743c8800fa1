#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "rvwb/repl.hpp"

using namespace rvwb;

namespace {

struct TempSource {
  std::string path;
  explicit TempSource(std::string_view text) {
    static int counter = 0;
    path = (std::filesystem::temp_directory_path() /
            ("repl_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + ".s"))
               .string();
    std::ofstream(path) << text;
  }
  ~TempSource() { std::filesystem::remove(path); }
};

std::string run_script(const std::string& script, int* status = nullptr) {
  std::istringstream in(script);
  std::ostringstream out;
  const int code = repl::run(in, out, {}, true);
  if (status) *status = code;
  return out.str();
}

bool contains(const std::string& haystack, std::string_view needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("value formatting") {
  CHECK(repl::format_value(7, repl::Radix::hex) == "0x00000007");
  CHECK(repl::format_value(0xFFFFFFFF, repl::Radix::dec) == "-1");
  CHECK(repl::format_value(5, repl::Radix::bin) == "0b00000000000000000000000000000101");
  CHECK(repl::parse_radix("oct") == std::nullopt);
}

TEST_CASE("regs after li") {
  TempSource src("li x5, 7\n");
  const auto out = run_script("load " + src.path + "\nrun\nregs hex\n");
  CHECK(contains(out, "x5 (t0) = 0x00000007"));
  std::istringstream lines(out.substr(out.find("x0 (zero)")));
  int rows = 0;
  for (std::string line; std::getline(lines, line);) rows += line.rfind('x', 0) == 0;
  CHECK(rows == 32);
}

TEST_CASE("break on a label echoes the address") {
  TempSource src("nop\nmain: addi a0, x0, 1\n");
  const auto out = run_script("load " + src.path + "\nbreak main\nrun\n");
  CHECK(contains(out, "breakpoint set at 0x00000014 (main)"));
  CHECK(contains(out, "breakpoint at pc=0x00000014"));
  CHECK(contains(run_script("load " + src.path + "\nbreak 0x14\nunbreak main\n"), "breakpoint cleared at 0x00000014"));
}

TEST_CASE("mem shows preloaded data") {
  TempSource src(".data\n.word 1, 2\n");
  const auto out = run_script("load " + src.path + "\nmem 0x10000000 2\n");
  CHECK(contains(out, "0x10000000: 0x00000001  (1)"));
  CHECK(contains(out, "0x10000004: 0x00000002  (2)"));
  CHECK(contains(run_script("load " + src.path + "\nmem 0x20000000 1\n"), "unmapped"));
}

TEST_CASE("errors keep the REPL going") {
  TempSource src("nop\n");
  int status = 0;
  const auto out = run_script("frobnicate\nstep\nload /nonexistent/file.s\nload " + src.path +
                                  "\nbreak 0x3\nstep 0\nregs oct\nlist\n",
                              &status);
  CHECK(contains(out, "error: unknown command 'frobnicate' (try 'help')"));
  CHECK(contains(out, "error: no program loaded"));
  CHECK(contains(out, "error: cannot open"));
  CHECK(contains(out, "not an instruction address"));
  CHECK(contains(out, "usage: step"));
  CHECK(contains(out, "usage: regs"));
  CHECK(contains(out, "nop"));  // the listing still printed
  CHECK(status == 1);
}

TEST_CASE("load errors report user lines") {
  TempSource src("nop\nadd x1, x2\n");
  const auto out = run_script("load " + src.path + "\n");
  CHECK(contains(out, "line 2:"));
}

TEST_CASE("quit stops reading") {
  const auto out = run_script("help\nquit\nfrobnicate\n");
  CHECK(contains(out, "commands:"));
  CHECK_FALSE(contains(out, "frobnicate"));
}

TEST_CASE("step and reset") {
  TempSource src("addi a0, x0, 3\n");
  const auto out = run_script("load " + src.path + "\nstep 4\nstep\nreset\nregs dec\n");
  CHECK(contains(out, "running at pc=0x00000010 after 4 steps"));
  CHECK(contains(out, "exit at pc=0x00000014 after 5 steps"));
  CHECK(contains(out, "x10 (a0) = 0x00000003"));
  CHECK(contains(out, "reset: pc=0x00000000"));
  CHECK(contains(out.substr(out.find("reset:")), "x10 (a0) = 0\n"));
}
