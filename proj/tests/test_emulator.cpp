#include <doctest.h>

#include <random>

#include "oracle.hpp"
#include "rvwb/assembler.hpp"
#include "rvwb/emulator.hpp"

using namespace rvwb;

namespace {

struct Machine {
  AssembledProgram program;
  MachineState state;

  explicit Machine(std::string_view source) : program(assemble(source)), state(setup_emulator(program)) {}

  // executes the kernel prefix so the first user instruction is next
  Machine& boot() {
    for (std::size_t i = 0; i < program.kernel_prefix_length; ++i) single_step(state, program);
    return *this;
  }
  Word x(unsigned i) const { return state.regs[i]; }
};

}  // namespace

TEST_CASE("setup_emulator") {
  Machine m(".data\n.word 42\n.text\nnop\n");
  for (auto r : m.state.regs) CHECK(r == 0);
  CHECK(m.state.pc == 0);
  CHECK(m.state.halt == Halt::running);
  CHECK(m.state.step_count == 0);
  CHECK(m.state.memory.at(0x10000000) == 42u);
  CHECK(m.state.memory.at(0) == m.program.text_image[0].word);

  single_step(m.state, m.program);
  single_step(m.state, m.program);
  CHECK(m.x(2) == 0x7FFFFFF0u);
  single_step(m.state, m.program);
  single_step(m.state, m.program);
  CHECK(m.x(3) == 0x10000000u);
  CHECK(m.state.step_count == 4);
}

TEST_CASE("single_step addi") {
  Machine m("addi x5, x0, 7");
  m.boot();
  const Word p = m.state.pc;
  const auto result = single_step(m.state, m.program);
  CHECK(m.x(5) == 7);
  CHECK(m.state.pc == p + 4);
  CHECK(result.pc_before == p);
  CHECK(result.pc_after == p + 4);
  CHECK(result.changed_registers == std::set<RegisterIndex>{RegisterIndex{5}});
  CHECK(result.changed_memory.empty());
}

TEST_CASE("high multiplies on edge operands") {
  Machine m("li x1, 0x80000000\nmv x2, x1\nmulh x3, x1, x2\n"
            "li x1, 0xFFFFFFFF\nmv x2, x1\nmulhu x4, x1, x2\nmulhsu x5, x1, x2\nmul x6, x1, x2\n");
  run(m.state, m.program, {});
  CHECK(m.state.halt == Halt::exit);
  CHECK(m.x(3) == 0x40000000u);
  CHECK(m.x(4) == 0xFFFFFFFEu);
  CHECK(m.x(5) == 0xFFFFFFFFu);
  CHECK(m.x(6) == 0x00000001u);
}

TEST_CASE("multiplies agree with the wide-multiply oracle") {
  std::mt19937 rng(3);
  std::vector<Word> edges = {0, 1, 2, 0x7FFFFFFF, 0x80000000, 0x80000001, 0xFFFFFFFF, 0xFFFFFFFE};
  for (int i = 0; i < 40; ++i) edges.push_back(rng());
  for (Word a : edges) {
    for (Word b : {edges[rng() % edges.size()], edges[rng() % edges.size()]}) {
      Machine m("mul x10, x1, x2\nmulh x11, x1, x2\nmulhsu x12, x1, x2\nmulhu x13, x1, x2\n");
      m.boot();
      m.state.regs[1] = a;
      m.state.regs[2] = b;
      for (int k = 0; k < 4; ++k) single_step(m.state, m.program);
      CHECK(m.x(10) == static_cast<Word>(std::uint64_t{a} * b));
      CHECK(m.x(11) == oracle::wide_mul_high(a, b, true, true));
      CHECK(m.x(12) == oracle::wide_mul_high(a, b, true, false));
      CHECK(m.x(13) == oracle::wide_mul_high(a, b, false, false));
    }
  }
}

TEST_CASE("store then load") {
  Machine m("li x5, 0x1234ABCD\nsw x5, 0(x2)\nlw x6, 0(x2)\n");
  run(m.state, m.program, {});
  CHECK(m.x(6) == m.x(5));
  CHECK(m.state.memory.at(0x7FFFFFF0) == 0x1234ABCDu);
}

TEST_CASE("memory access") {
  MachineState s;
  CHECK(read_memory(s, 0x20000000, AccessWidth::word) == 0);
  CHECK(s.memory.empty());

  write_memory(s, 0x100, AccessWidth::byte, 0xAB);
  CHECK(read_memory(s, 0x100, AccessWidth::byte) == 0xABu);
  CHECK(read_memory(s, 0x100, AccessWidth::byte, true) == 0xFFFFFFABu);

  write_memory(s, 0x200, AccessWidth::word, 0x11223344);
  CHECK(read_memory(s, 0x200, AccessWidth::byte) == 0x44u);
  CHECK(read_memory(s, 0x201, AccessWidth::byte) == 0x33u);
  CHECK(read_memory(s, 0x202, AccessWidth::half) == 0x1122u);

  std::vector<MemoryChange> changes;
  write_memory(s, 0x203, AccessWidth::byte, 0x99, &changes);
  REQUIRE(changes.size() == 1);
  CHECK(changes[0] == MemoryChange{0x200, 0x11223344, 0x99223344});
  changes.clear();
  write_memory(s, 0x203, AccessWidth::byte, 0x99, &changes);
  CHECK(changes.empty());

  for (Word a : {0x201u, 0x202u, 0x203u}) {
    try {
      read_memory(s, a, AccessWidth::word);
      FAIL("expected MisalignedAccess");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MisalignedAccess);
    }
  }
  CHECK_THROWS_AS(write_memory(s, 0x201, AccessWidth::half, 0), Error);
}

TEST_CASE("random byte/half/word round trips match the little-endian oracle") {
  std::mt19937 rng(256);
  for (int i = 0; i < 256; ++i) {
    MachineState s;
    const unsigned width = 1u << (rng() % 3);
    const bool is_signed = rng() % 2;
    const Word value = rng();
    const Word address = 0x10000000 + (rng() % 256) * 4 + (rng() % (4 / width)) * width;
    write_memory(s, address, static_cast<AccessWidth>(width), value);
    const Word got = read_memory(s, address, static_cast<AccessWidth>(width), is_signed);

    const std::uint64_t mask = (std::uint64_t{1} << (8 * width)) - 1;
    std::uint64_t expect = value & mask;
    if (is_signed && (expect >> (8 * width - 1))) expect |= ~mask;
    CHECK(got == static_cast<Word>(expect));
  }
}

TEST_CASE("zero register stays zero") {
  Machine m("addi x0, x0, 5\nlui x0, 0x1\njal x0, next\nnext: add x0, x2, x2\nlw x0, 0(x3)\n");
  for (int i = 0; i < 9; ++i) {
    const auto r = single_step(m.state, m.program);
    CHECK(m.x(0) == 0);
    CHECK_FALSE(r.changed_registers.contains(RegisterIndex{0}));
  }
}

TEST_CASE("control flow") {
  Machine m("li a0, 3\nloop: addi a0, a0, -1\nbnez a0, loop\njal ra, f\nj end\nf: li a1, 9\nret\nend: nop\n");
  run(m.state, m.program, {});
  CHECK(m.state.halt == Halt::exit);
  CHECK(m.x(10) == 0);
  CHECK(m.x(11) == 9);
  CHECK(m.x(1) == 32);  // jal sits at 28

  Machine lt("li t0, -1\nli t1, 1\nslt a0, t0, t1\nsltu a1, t0, t1\nblt t0, t1, yes\nli a2, 1\nyes: bltu t0, t1, no\nli a3, 1\nno:\n");
  run(lt.state, lt.program, {});
  CHECK(lt.x(10) == 1);
  CHECK(lt.x(11) == 0);
  CHECK(lt.x(12) == 0);
  CHECK(lt.x(13) == 1);

  Machine sh("li t0, -16\nli t1, 36\nsra a0, t0, t1\nsrl a1, t0, t1\nsll a2, t0, t1\nauipc a3, 1\n");
  run(sh.state, sh.program, {});
  CHECK(sh.x(10) == 0xFFFFFFFFu);
  CHECK(sh.x(11) == 0x0FFFFFFFu);
  CHECK(sh.x(12) == 0xFFFFFF00u);
  CHECK(sh.x(13) == 0x1000u + 36);  // auipc sits at 36
}

TEST_CASE("halting conditions") {
  Machine e("ecall\n");
  run(e.state, e.program, {});
  CHECK(e.state.halt == Halt::ecall);
  CHECK(e.state.pc == 16);
  CHECK(e.state.step_count == 5);

  Machine b("ebreak\n");
  run(b.state, b.program, {});
  CHECK(b.state.halt == Halt::ebreak);

  Machine f("fence\naddi a0, x0, 1\n");
  run(f.state, f.program, {});
  CHECK(f.state.halt == Halt::exit);
  CHECK(f.x(10) == 1);

  Machine mis("lw a0, 2(gp)\n");
  run(mis.state, mis.program, {});
  CHECK(mis.state.halt == Halt::fault);
  CHECK(mis.state.pc == 16);
  CHECK(mis.state.step_count == 4);
  CHECK(mis.state.fault_detail.find("misaligned") != std::string::npos);

  Machine jump("li t0, 0x102\njr t0\n");
  run(jump.state, jump.program, {});
  CHECK(jump.state.halt == Halt::fault);

  Machine illegal("la t0, data\njr t0\n.data\ndata: .word 0\n");
  run(illegal.state, illegal.program, {});
  CHECK(illegal.state.halt == Halt::fault);

  // a faulted step leaves registers, memory and the step count untouched
  Machine store("li a0, 5\nsw a0, 1(gp)\n");
  for (int i = 0; i < 5; ++i) single_step(store.state, store.program);
  const auto before = store.state;
  const auto r = single_step(store.state, store.program);
  CHECK(r.halt == Halt::fault);
  CHECK(store.state.regs == before.regs);
  CHECK(store.state.memory == before.memory);
  CHECK(store.state.step_count == before.step_count);
  CHECK(r.changed_registers.empty());
}

TEST_CASE("run: exit, breakpoints and step limit") {
  Machine empty("");
  const auto taken = run(empty.state, empty.program, {});
  CHECK(empty.state.halt == Halt::exit);
  CHECK(empty.state.pc == empty.program.exit_address);
  CHECK(taken == empty.program.kernel_prefix_length);

  Machine line("addi a0, x0, 1\naddi a1, x0, 2\naddi a2, x0, 3\n");
  Breakpoints bps;
  const Word b = 16 + 4;
  bps.set(line.program, b);
  run(line.state, line.program, bps);
  CHECK(line.state.halt == Halt::breakpoint);
  CHECK(line.state.pc == b);
  CHECK(line.x(10) == 1);
  CHECK(line.x(11) == 0);
  // resuming from a breakpoint executes the breakpointed instruction first
  line.state.halt = Halt::running;
  run(line.state, line.program, bps);
  CHECK(line.state.halt == Halt::exit);
  CHECK(line.x(11) == 2);

  Machine loop("spin: j spin\n");
  run(loop.state, loop.program, {}, 10);
  const auto at = loop.state.step_count;
  loop.state.halt = Halt::running;
  CHECK(run(loop.state, loop.program, {}, 1000) == 1000);
  CHECK(loop.state.halt == Halt::step_limit);
  CHECK(loop.state.step_count == at + 1000);
}

TEST_CASE("breakpoint set operations") {
  Machine m("nop\nnop\n");
  Breakpoints bps;
  const Breakpoints start = bps;
  bps.set(m.program, 16);
  bps.clear(m.program, 16);
  CHECK(bps == start);
  bps.set(m.program, 16);
  bps.set(m.program, 16);
  CHECK(bps.size() == 1);
  bps.clear(m.program, 20);
  CHECK(bps.size() == 1);
  for (Word bad : {18u, 0x10000000u, 0x1000u}) {
    try {
      bps.set(m.program, bad);
      FAIL("expected NotAnInstructionAddress");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NotAnInstructionAddress);
    }
  }
}

TEST_CASE("determinism and change-set soundness") {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::string source;
    for (const auto& in : oracle::random_program(rng, 40, 3, 256)) source += oracle::to_asm(in) + "\n";
    const auto program = assemble(source);
    auto a = setup_emulator(program);
    auto b = setup_emulator(program);
    while (a.halt == Halt::running && a.pc != program.exit_address) {
      const auto before = a;
      const auto ra = single_step(a, program);
      const auto rb = single_step(b, program);
      REQUIRE(ra == rb);
      REQUIRE(a == b);
      for (unsigned i = 0; i < 32; ++i)
        CHECK((before.regs[i] != a.regs[i]) == ra.changed_registers.contains(RegisterIndex{i}));
      std::set<Word> changed;
      for (const auto& c : ra.changed_memory) {
        CHECK(c.old_value != c.new_value);
        CHECK(a.memory.at(c.address) == c.new_value);
        changed.insert(c.address);
      }
      for (const auto& [addr, value] : a.memory) {
        const auto old = before.memory.find(addr);
        const Word old_value = old == before.memory.end() ? 0 : old->second;
        CHECK((old_value != value) == changed.contains(addr));
      }
      CHECK(a.pc % 4 == 0);
      CHECK(program.is_instruction_address(a.pc));
    }
  }
}
