#include "rvwb/assembler.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fmt/format.h>
#include <set>

namespace rvwb {

namespace {

constexpr std::uint8_t kOpLoad = 0b0000011;
constexpr std::uint8_t kOpJalr = 0b1100111;

constexpr std::size_t kMaxSpace = 16u << 20;

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool is_ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool is_ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool is_identifier(std::string_view s) {
  return !s.empty() && is_ident_start(s[0]) && std::all_of(s.begin(), s.end(), is_ident_char);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  return lines;
}

struct LineTokens {
  std::vector<std::string> labels;
  std::vector<std::string> rest;
  std::optional<std::string> error;
};

LineTokens tokenize(std::string_view line) {
  LineTokens out;

  // strip the comment, honouring quoted strings
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted && c == '\\') {
      ++i;
    } else if (c == '"') {
      quoted = !quoted;
    } else if (!quoted && c == '#') {
      line = line.substr(0, i);
      break;
    }
  }
  if (quoted) {
    out.error = "unterminated string literal";
    return out;
  }

  std::size_t i = 0;
  auto skip_space = [&] {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  };

  for (;;) {
    skip_space();
    std::size_t j = i;
    if (j < line.size() && is_ident_start(line[j])) {
      while (j < line.size() && is_ident_char(line[j])) ++j;
      if (j < line.size() && line[j] == ':') {
        out.labels.emplace_back(line.substr(i, j - i));
        i = j + 1;
        continue;
      }
    }
    break;
  }

  // punctuation must sit between tokens: "a, b" and "off(reg)"
  enum class Last { start, token, comma, open, close } last = Last::start;
  int depth = 0;
  auto malformed = [&] {
    out.error = "malformed operand list";
    out.rest.clear();
    return out;
  };
  while (i < line.size()) {
    const char c = line[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c == ',') {
      if (last != Last::token && last != Last::close) return malformed();
      last = Last::comma;
      ++i;
      continue;
    }
    if (c == '(') {
      if ((last != Last::token && last != Last::comma) || depth > 0) return malformed();
      last = Last::open;
      ++depth;
      ++i;
      continue;
    }
    if (c == ')') {
      if (last != Last::token || depth == 0) return malformed();
      last = Last::close;
      --depth;
      ++i;
      continue;
    }
    if (last == Last::close) return malformed();
    last = Last::token;
    std::size_t j = i;
    if (c == '"') {
      ++j;
      while (j < line.size() && line[j] != '"') j += line[j] == '\\' ? 2 : 1;
      ++j;
    } else if (c == '%') {
      // %hi(label) / %lo(label) stay a single token
      while (j < line.size() && line[j] != '(' && line[j] != ',' &&
             !std::isspace(static_cast<unsigned char>(line[j])))
        ++j;
      if (j < line.size() && line[j] == '(') {
        auto close = line.find(')', j);
        j = close == std::string_view::npos ? line.size() : close + 1;
      }
    } else {
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != ',' &&
             line[j] != '(' && line[j] != ')' && line[j] != '"')
        ++j;
    }
    out.rest.emplace_back(line.substr(i, j - i));
    i = j;
  }
  if (depth != 0 || last == Last::comma || last == Last::open) return malformed();
  return out;
}

[[noreturn]] void malformed(std::string_view what, int line) {
  throw Error(ErrorCode::MalformedOperand, std::string(what), line ? std::optional<int>(line) : std::nullopt);
}

std::optional<int> opt_line(int line) { return line ? std::optional<int>(line) : std::nullopt; }

RegisterIndex reg_operand(std::string_view token, int line) {
  if (auto reg = parse_register(token)) return *reg;
  throw Error(ErrorCode::UnknownRegister, fmt::format("unknown register '{}'", token), opt_line(line));
}

// %hi(sym) / %lo(sym)
std::optional<std::pair<std::string, std::string>> relocation(std::string_view token) {
  if (token.size() < 6 || token[0] != '%' || token.back() != ')') return std::nullopt;
  auto open = token.find('(');
  if (open == std::string_view::npos) return std::nullopt;
  return std::pair{lower(token.substr(1, open - 1)), std::string(token.substr(open + 1, token.size() - open - 2))};
}

Word label_address(std::string_view name, const LabelMap& labels, int line) {
  auto it = labels.find(name);
  if (it == labels.end())
    throw Error(ErrorCode::UndefinedLabel, fmt::format("undefined label '{}'", name), opt_line(line));
  return it->second;
}

Word hi20(Word address) { return ((address + 0x800u) >> 12) & 0xFFFFFu; }
std::int32_t lo12(Word address) { return sign_extend(address & 0xFFFu, 12); }

// Plain 12-bit style immediates: literal or %lo(label).
std::int64_t low_immediate(std::string_view token, const LabelMap* labels, int line) {
  if (auto value = parse_integer(token)) return *value;
  if (auto reloc = relocation(token)) {
    if (reloc->first != "lo" || !is_identifier(reloc->second))
      malformed(fmt::format("unsupported relocation '{}'", token), line);
    return labels ? lo12(label_address(reloc->second, *labels, line)) : 0;
  }
  malformed(fmt::format("expected immediate, got '{}'", token), line);
}

std::int64_t upper_immediate(std::string_view token, const LabelMap* labels, int line) {
  if (auto value = parse_integer(token)) {
    if (*value < -0x80000 || *value > 0xFFFFF)
      throw Error(ErrorCode::ImmediateOutOfRange,
                  fmt::format("upper immediate {} outside [-0x80000, 0xfffff]", token), opt_line(line));
    return static_cast<std::int32_t>((static_cast<Word>(*value) & 0xFFFFFu) << 12);
  }
  if (auto reloc = relocation(token)) {
    if (reloc->first != "hi" || !is_identifier(reloc->second))
      malformed(fmt::format("unsupported relocation '{}'", token), line);
    return labels ? static_cast<std::int32_t>(hi20(label_address(reloc->second, *labels, line)) << 12) : 0;
  }
  malformed(fmt::format("expected upper immediate, got '{}'", token), line);
}

// Branch/jump targets: numeric PC-relative offset or label.
std::int64_t target_immediate(std::string_view token, Word address, const LabelMap* labels, int line) {
  if (auto value = parse_integer(token)) return *value;
  if (!is_identifier(token)) malformed(fmt::format("expected label or offset, got '{}'", token), line);
  if (!labels) return 0;
  return static_cast<std::int64_t>(label_address(token, *labels, line)) - static_cast<std::int64_t>(address);
}

std::int32_t checked_imm(std::int64_t value, std::string_view token, int line) {
  if (value < INT32_MIN || value > INT32_MAX)
    throw Error(ErrorCode::ImmediateOutOfRange, fmt::format("immediate {} out of range", token), opt_line(line));
  return static_cast<std::int32_t>(value);
}

void expect_arity(const OpSpec& spec, std::size_t got, std::size_t want, std::string_view shape, int line) {
  if (got != want)
    throw Error(ErrorCode::InvalidOperandForFormat,
                fmt::format("{} expects {} operand{} ({}), got {}", spec.mnemonic, want, want == 1 ? "" : "s",
                            shape, got),
                opt_line(line));
}

std::string join_operands(const std::vector<std::string>& symbols, std::size_t from) {
  std::string out;
  for (std::size_t i = from; i < symbols.size(); ++i) {
    if (i > from) out += ", ";
    out += symbols[i];
  }
  return out;
}

std::vector<std::uint8_t> unescape(std::string_view quoted, int line) {
  if (quoted.size() < 2 || quoted.front() != '"' || quoted.back() != '"')
    malformed(fmt::format("expected string literal, got '{}'", quoted), line);
  std::vector<std::uint8_t> out;
  for (std::size_t i = 1; i + 1 < quoted.size(); ++i) {
    char c = quoted[i];
    if (c == '\\') {
      if (i + 2 >= quoted.size()) malformed("dangling escape in string literal", line);
      switch (quoted[++i]) {
        case 'n': c = '\n'; break;
        case 't': c = '\t'; break;
        case 'r': c = '\r'; break;
        case '0': c = '\0'; break;
        case '\\': c = '\\'; break;
        case '"': c = '"'; break;
        default: malformed(fmt::format("unknown escape '\\{}'", quoted[i]), line);
      }
    }
    out.push_back(static_cast<std::uint8_t>(c));
  }
  return out;
}

ProgramItem error_item(std::vector<std::string> symbols, int line, bool is_kernel, std::string message) {
  ProgramItem item;
  item.symbols = std::move(symbols);
  item.kind = ItemKind::error;
  item.line = line;
  item.is_kernel = is_kernel;
  item.error_message = std::move(message);
  return item;
}

}  // namespace

void KernelConfig::validate() const {
  if (text_base % 4 || data_base % 4 || stack_top % 4)
    throw Error(ErrorCode::InvalidConfig, "kernel addresses must be 4-aligned");
  if (!(text_base < data_base && data_base < stack_top))
    throw Error(ErrorCode::InvalidConfig, "layout must satisfy text_base < data_base < stack_top");
}

std::optional<int> CombinedSource::user_line(int line) const {
  if (is_kernel_line(line) || line < 1) return std::nullopt;
  return line - prefix_lines;
}

CombinedSource wrap_with_kernel(std::string_view user_source, const KernelConfig& config) {
  config.validate();
  CombinedSource out;

  const std::string prefix = fmt::format(
      "# kernel: initialize stack and global pointers\n"
      "li sp, {:#x}\n"
      "li gp, {:#x}\n",
      config.stack_top, config.data_base);
  const std::string suffix = fmt::format(
      ".text\n"
      "{0}:\n"
      "j {0}  # exit loop\n",
      kExitLabel);

  out.prefix_lines = 3;
  out.suffix_lines = 3;
  out.user_lines = static_cast<int>(split_lines(user_source).size());

  out.text = prefix;
  out.text += user_source;
  if (!user_source.empty() && user_source.back() != '\n') out.text += '\n';
  out.text += suffix;
  return out;
}

const char* to_string(ItemKind kind) {
  switch (kind) {
    case ItemKind::instruction: return "instruction";
    case ItemKind::label: return "label";
    case ItemKind::pseudo: return "pseudo";
    case ItemKind::directive: return "directive";
    case ItemKind::error: return "error";
  }
  return "error";
}

std::optional<std::int64_t> parse_integer(std::string_view token) {
  bool negative = false;
  if (!token.empty() && (token[0] == '-' || token[0] == '+')) {
    negative = token[0] == '-';
    token.remove_prefix(1);
  }
  int base = 10;
  if (token.size() > 2 && token[0] == '0' && (token[1] == 'x' || token[1] == 'X')) {
    base = 16;
    token.remove_prefix(2);
  }
  if (token.empty()) return std::nullopt;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value, base);
  if (ec != std::errc{} || ptr != token.data() + token.size() || value > (std::uint64_t{1} << 62))
    return std::nullopt;
  const auto signed_value = static_cast<std::int64_t>(value);
  return negative ? -signed_value : signed_value;
}

std::string format_item(const ProgramItem& item) {
  const auto& s = item.symbols;
  switch (item.kind) {
    case ItemKind::label: return s.empty() ? std::string(":") : s[0] + ":";
    case ItemKind::instruction: {
      auto spec = find_opspec(s[0]);
      if (spec && s.size() == 4) {
        const OpSpec& op = spec->get();
        const bool paren_jalr = op.opcode == kOpJalr && !parse_register(s[2]);
        if (op.opcode == kOpLoad || op.format == Format::S || paren_jalr)
          return fmt::format("{} {}, {}({})", s[0], s[1], s[2], s[3]);
      }
      break;
    }
    case ItemKind::error:
      if (s.empty()) return item.error_message;
      break;
    default: break;
  }
  if (s.empty()) return {};
  if (s.size() == 1) return s[0];
  return s[0] + " " + join_operands(s, 1);
}

bool ParseResult::has_errors() const {
  return std::any_of(items.begin(), items.end(), [](const auto& i) { return i.kind == ItemKind::error; });
}

std::vector<ProgramItem> ParseResult::errors() const {
  std::vector<ProgramItem> out;
  std::copy_if(items.begin(), items.end(), std::back_inserter(out),
               [](const auto& i) { return i.kind == ItemKind::error; });
  return out;
}

DecodedInstruction build_instruction(const std::vector<std::string>& symbols, Word address,
                                     const LabelMap* labels, int line) {
  if (symbols.empty()) malformed("empty instruction", line);
  const OpSpec& spec = [&]() -> const OpSpec& {
    try {
      return lookup_opspec(symbols[0]);
    } catch (const Error& e) {
      throw Error(e.code(), e.what(), opt_line(line));
    }
  }();
  const std::size_t n = symbols.size() - 1;
  auto op = [&](std::size_t i) -> const std::string& { return symbols[i + 1]; };

  DecodedInstruction instr;
  instr.op = spec.id;
  switch (spec.format) {
    case Format::R:
      expect_arity(spec, n, 3, "rd, rs1, rs2", line);
      instr.rd = reg_operand(op(0), line);
      instr.rs1 = reg_operand(op(1), line);
      instr.rs2 = reg_operand(op(2), line);
      break;
    case Format::I:
      if (spec.fixed_imm) {
        expect_arity(spec, n, 0, "none", line);
        instr.rd = RegisterIndex{0};
        instr.rs1 = RegisterIndex{0};
        instr.imm = *spec.fixed_imm;
      } else if (spec.id == Mnemonic::FENCE) {
        expect_arity(spec, n, 0, "none", line);
        instr.rd = RegisterIndex{0};
        instr.rs1 = RegisterIndex{0};
        instr.imm = 0x0FF;  // pred = succ = iorw
      } else if (spec.opcode == kOpLoad) {
        expect_arity(spec, n, 3, "rd, offset(rs1)", line);
        instr.rd = reg_operand(op(0), line);
        instr.imm = checked_imm(low_immediate(op(1), labels, line), op(1), line);
        instr.rs1 = reg_operand(op(2), line);
      } else if (spec.opcode == kOpJalr) {
        expect_arity(spec, n, 3, "rd, rs1, imm", line);
        instr.rd = reg_operand(op(0), line);
        // both "jalr rd, rs1, imm" and "jalr rd, imm(rs1)"
        const bool paren_form = !parse_register(op(1)) && parse_register(op(2));
        const auto& base = paren_form ? op(2) : op(1);
        const auto& offset = paren_form ? op(1) : op(2);
        instr.rs1 = reg_operand(base, line);
        instr.imm = checked_imm(low_immediate(offset, labels, line), offset, line);
      } else {
        expect_arity(spec, n, 3, spec.is_shift_immediate() ? "rd, rs1, shamt" : "rd, rs1, imm", line);
        instr.rd = reg_operand(op(0), line);
        instr.rs1 = reg_operand(op(1), line);
        instr.imm = checked_imm(low_immediate(op(2), labels, line), op(2), line);
      }
      break;
    case Format::S:
      expect_arity(spec, n, 3, "rs2, offset(rs1)", line);
      instr.rs2 = reg_operand(op(0), line);
      instr.imm = checked_imm(low_immediate(op(1), labels, line), op(1), line);
      instr.rs1 = reg_operand(op(2), line);
      break;
    case Format::B:
      expect_arity(spec, n, 3, "rs1, rs2, target", line);
      instr.rs1 = reg_operand(op(0), line);
      instr.rs2 = reg_operand(op(1), line);
      instr.imm = checked_imm(target_immediate(op(2), address, labels, line), op(2), line);
      break;
    case Format::U:
      expect_arity(spec, n, 2, "rd, imm", line);
      instr.rd = reg_operand(op(0), line);
      instr.imm = checked_imm(upper_immediate(op(1), labels, line), op(1), line);
      break;
    case Format::J:
      expect_arity(spec, n, 2, "rd, target", line);
      instr.rd = reg_operand(op(0), line);
      instr.imm = checked_imm(target_immediate(op(1), address, labels, line), op(1), line);
      break;
  }

  try {
    encode(instr);
  } catch (const Error& e) {
    const bool pc_relative = spec.format == Format::B || spec.format == Format::J;
    const bool from_label = pc_relative && !parse_integer(symbols.back());
    if (from_label && e.code() == ErrorCode::ImmediateOutOfRange)
      throw Error(ErrorCode::BranchOutOfRange,
                  fmt::format("{}: target '{}' is out of range ({} bytes away)", spec.mnemonic, symbols.back(),
                              *instr.imm),
                  opt_line(line));
    throw Error(e.code(), e.what(), opt_line(line));
  }
  return instr;
}

bool is_pseudo_mnemonic(std::string_view mnemonic) {
  static const std::set<std::string, std::less<>> kPseudo{"nop", "mv", "li", "la", "j",
                                                          "jr", "ret", "beqz", "bnez"};
  return kPseudo.contains(lower(mnemonic));
}

std::vector<ProgramItem> expand_pseudo(const ProgramItem& item) {
  if (item.symbols.empty() || !is_pseudo_mnemonic(item.symbols[0]))
    malformed(fmt::format("'{}' is not a pseudo-instruction", item.symbols.empty() ? "" : item.symbols[0]),
              item.line);
  const std::string name = lower(item.symbols[0]);
  const std::vector<std::string> ops(item.symbols.begin() + 1, item.symbols.end());
  const int line = item.line;

  auto arity = [&](std::size_t want, std::string_view shape) {
    if (ops.size() != want)
      throw Error(ErrorCode::InvalidOperandForFormat,
                  fmt::format("{} expects {} operand{} ({}), got {}", name, want, want == 1 ? "" : "s", shape,
                              ops.size()),
                  opt_line(line));
  };
  auto reg = [&](std::size_t i) {
    reg_operand(ops[i], line);
    return ops[i];
  };
  auto label = [&](std::size_t i) {
    if (!is_identifier(ops[i])) malformed(fmt::format("expected label, got '{}'", ops[i]), line);
    return ops[i];
  };

  std::vector<std::vector<std::string>> expansion;
  if (name == "nop") {
    arity(0, "none");
    expansion = {{"addi", "x0", "x0", "0"}};
  } else if (name == "mv") {
    arity(2, "rd, rs");
    expansion = {{"addi", reg(0), reg(1), "0"}};
  } else if (name == "li") {
    arity(2, "rd, imm");
    const auto rd = reg(0);
    const auto value = parse_integer(ops[1]);
    if (!value) malformed(fmt::format("expected immediate, got '{}'", ops[1]), line);
    if (*value < INT32_MIN || *value > static_cast<std::int64_t>(UINT32_MAX))
      throw Error(ErrorCode::ImmediateOutOfRange, fmt::format("li: {} does not fit in 32 bits", ops[1]),
                  opt_line(line));
    const auto bits = static_cast<Word>(*value);
    const auto as_signed = static_cast<std::int32_t>(bits);
    if (as_signed >= -2048 && as_signed <= 2047) {
      expansion = {{"addi", rd, "x0", std::to_string(as_signed)}};
    } else {
      expansion = {{"lui", rd, fmt::format("{:#x}", hi20(bits))},
                   {"addi", rd, rd, std::to_string(lo12(bits))}};
    }
  } else if (name == "la") {
    arity(2, "rd, label");
    const auto rd = reg(0);
    const auto target = label(1);
    expansion = {{"lui", rd, "%hi(" + target + ")"}, {"addi", rd, rd, "%lo(" + target + ")"}};
  } else if (name == "j") {
    arity(1, "label");
    expansion = {{"jal", "x0", ops[0]}};
  } else if (name == "jr") {
    arity(1, "rs");
    expansion = {{"jalr", "x0", reg(0), "0"}};
  } else if (name == "ret") {
    arity(0, "none");
    expansion = {{"jalr", "x0", "ra", "0"}};
  } else if (name == "beqz" || name == "bnez") {
    arity(2, "rs, label");
    expansion = {{name == "beqz" ? "beq" : "bne", reg(0), "x0", ops[1]}};
  }

  std::vector<ProgramItem> out;
  out.reserve(expansion.size());
  for (std::size_t i = 0; i < expansion.size(); ++i) {
    ProgramItem base;
    base.symbols = std::move(expansion[i]);
    base.kind = ItemKind::instruction;
    base.line = item.line;
    base.is_kernel = item.is_kernel;
    if (item.address) base.address = *item.address + static_cast<Word>(4 * i);
    out.push_back(std::move(base));
  }
  return out;
}

DirectiveResult process_directive(const ProgramItem& item, Word cursor) {
  if (item.symbols.empty()) malformed("empty directive", item.line);
  const std::string name = lower(item.symbols[0]);
  const std::vector<std::string> args(item.symbols.begin() + 1, item.symbols.end());
  const int line = item.line;

  DirectiveResult out;
  out.start = cursor;
  out.cursor = cursor;

  if (name == ".text" || name == ".data") {
    if (!args.empty()) malformed(fmt::format("{} takes no operands", name), line);
    out.switch_to = name == ".text" ? Segment::text : Segment::data;
    return out;
  }

  auto emit_integers = [&](unsigned width, std::int64_t min, std::int64_t max) {
    if (args.empty()) malformed(fmt::format("{} needs at least one value", name), line);
    out.start = (cursor + width - 1) & ~(width - 1);
    for (const auto& arg : args) {
      auto value = parse_integer(arg);
      if (!value) malformed(fmt::format("{}: expected integer, got '{}'", name, arg), line);
      if (*value < min || *value > max)
        throw Error(ErrorCode::ImmediateOutOfRange, fmt::format("{}: value {} does not fit", name, arg),
                    opt_line(line));
      const auto bits = static_cast<std::uint64_t>(*value);
      for (unsigned b = 0; b < width; ++b) out.bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * b)));
    }
  };

  if (name == ".word") {
    emit_integers(4, INT32_MIN, UINT32_MAX);
  } else if (name == ".half") {
    emit_integers(2, INT16_MIN, UINT16_MAX);
  } else if (name == ".byte") {
    emit_integers(1, INT8_MIN, UINT8_MAX);
  } else if (name == ".space") {
    if (args.size() != 1) malformed(".space expects one size operand", line);
    auto size = parse_integer(args[0]);
    if (!size || *size < 0 || static_cast<std::uint64_t>(*size) > kMaxSpace)
      malformed(fmt::format(".space: invalid size '{}'", args[0]), line);
    out.bytes.assign(static_cast<std::size_t>(*size), 0);
  } else if (name == ".string" || name == ".asciz") {
    if (args.empty()) malformed(fmt::format("{} needs a string literal", name), line);
    for (const auto& arg : args) {
      auto bytes = unescape(arg, line);
      out.bytes.insert(out.bytes.end(), bytes.begin(), bytes.end());
      out.bytes.push_back(0);
    }
  } else {
    throw Error(ErrorCode::UnknownDirective, fmt::format("unknown directive '{}'", item.symbols[0]),
                opt_line(line));
  }
  out.cursor = out.start + static_cast<Word>(out.bytes.size());
  return out;
}

ParseResult parse(const CombinedSource& source, const KernelConfig& config) {
  ParseResult result;
  auto& items = result.items;

  Segment segment = Segment::text;
  Word text_cursor = config.text_base;
  Word data_cursor = config.data_base;
  std::set<std::string, std::less<>> defined;
  std::vector<std::size_t> pending_text;
  std::vector<std::size_t> pending_data;

  auto pending = [&](Segment s) -> std::vector<std::size_t>& {
    return s == Segment::text ? pending_text : pending_data;
  };
  auto bind = [&](Segment s, Word address) {
    for (auto index : pending(s)) {
      items[index].address = address;
      result.labels[items[index].symbols[0]] = address;
    }
    pending(s).clear();
  };

  const auto lines = split_lines(source.text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const int line = static_cast<int>(n) + 1;
    const bool kernel = source.is_kernel_line(line);
    auto tokens = tokenize(lines[n]);
    auto fail = [&](std::vector<std::string> symbols, std::string message) {
      items.push_back(error_item(std::move(symbols), line, kernel, std::move(message)));
    };

    if (tokens.error) {
      fail({}, *tokens.error);
      continue;
    }

    // pass 1: labels bind to whatever is emitted next in their segment
    for (auto& name : tokens.labels) {
      if (name == kExitLabel && !kernel) {
        fail({name}, fmt::format("duplicate label '{}' (reserved by the kernel)", name));
      } else if (defined.contains(name)) {
        fail({name}, fmt::format("duplicate label '{}'", name));
      } else {
        defined.insert(name);
        ProgramItem label;
        label.symbols = {name};
        label.kind = ItemKind::label;
        label.line = line;
        label.is_kernel = kernel;
        pending(segment).push_back(items.size());
        items.push_back(std::move(label));
      }
    }
    if (tokens.rest.empty()) continue;

    ProgramItem item;
    item.symbols = tokens.rest;
    item.line = line;
    item.is_kernel = kernel;
    const std::string head = lower(item.symbols[0]);

    if (head.front() == '.') {
      item.kind = ItemKind::directive;
      try {
        const bool data_directive = head == ".word" || head == ".half" || head == ".byte" ||
                                    head == ".space" || head == ".string" || head == ".asciz";
        if (segment == Segment::text && data_directive)
          throw Error(ErrorCode::MalformedOperand, fmt::format("{} is only allowed in the .data segment", head));
        auto emitted = process_directive(item, data_cursor);
        if (emitted.switch_to) {
          segment = *emitted.switch_to;
        } else {
          item.address = emitted.start;
          bind(Segment::data, emitted.start);
          data_cursor = emitted.cursor;
        }
        items.push_back(std::move(item));
      } catch (const Error& e) {
        fail(std::move(tokens.rest), e.what());
      }
      continue;
    }

    const bool pseudo = is_pseudo_mnemonic(head);
    if (!pseudo && !find_opspec(head)) {
      const bool bad_label = item.symbols[0].back() == ':';
      fail(std::move(tokens.rest), bad_label ? fmt::format("invalid label '{}'", item.symbols[0])
                                             : fmt::format("unknown instruction '{}'", item.symbols[0]));
      continue;
    }
    if (segment != Segment::text) {
      fail(std::move(tokens.rest), "instructions are only allowed in the .text segment");
      continue;
    }

    // pass 2 (per item): operand validation against the OpSpec, labels left unresolved
    std::vector<ProgramItem> emitted;
    try {
      item.address = text_cursor;
      if (pseudo) {
        item.kind = ItemKind::pseudo;
        emitted = expand_pseudo(item);
      } else {
        item.kind = ItemKind::instruction;
      }
      for (const auto& base : pseudo ? emitted : std::vector<ProgramItem>{item})
        build_instruction(base.symbols, *base.address, nullptr, line);
    } catch (const Error& e) {
      fail(std::move(tokens.rest), e.what());
      continue;
    }

    const auto slots = static_cast<Word>(pseudo ? emitted.size() : 1);
    if (static_cast<std::uint64_t>(text_cursor) + 4ull * slots > config.data_base) {
      fail(std::move(tokens.rest), "text segment overflows into the data segment");
      continue;
    }
    bind(Segment::text, text_cursor);
    text_cursor += 4 * slots;
    items.push_back(std::move(item));
    for (auto& base : emitted) items.push_back(std::move(base));
  }

  bind(Segment::text, text_cursor);
  bind(Segment::data, data_cursor);
  return result;
}

bool AssembledProgram::is_instruction_address(Word address) const {
  return text_word_at(address) != nullptr;
}

const TextWord* AssembledProgram::text_word_at(Word address) const {
  if (address % 4 || address < text_base || address >= text_end) return nullptr;
  const auto index = (address - text_base) / 4;
  if (index >= text_image.size()) return nullptr;
  return &text_image[index];
}

AssembledProgram resolve_and_encode(const ParseResult& parsed, const KernelConfig& config) {
  if (parsed.has_errors())
    throw Error(ErrorCode::AssemblyHasErrors, "cannot encode a program that has parse errors");

  AssembledProgram program;
  program.items = parsed.items;
  program.labels = parsed.labels;
  program.text_base = config.text_base;
  program.data_base = config.data_base;
  program.entry_address = config.text_base;

  std::map<Word, Word> data;
  std::uint64_t data_end = config.data_base;
  for (std::size_t i = 0; i < program.items.size(); ++i) {
    const auto& item = program.items[i];
    if (item.kind == ItemKind::instruction) {
      const auto instr = build_instruction(item.symbols, *item.address, &program.labels, item.line);
      program.text_image.push_back({*item.address, encode(instr), i});
    } else if (item.kind == ItemKind::directive && item.address) {
      const auto emitted = process_directive(item, *item.address);
      for (std::size_t b = 0; b < emitted.bytes.size(); ++b) {
        const Word address = emitted.start + static_cast<Word>(b);
        data[address & ~3u] |= Word{emitted.bytes[b]} << (8 * (address & 3u));
      }
      data_end = std::max<std::uint64_t>(data_end, emitted.cursor);
    }
  }

  program.text_end = config.text_base + static_cast<Word>(4 * program.text_image.size());
  program.data_end = static_cast<Word>((data_end + 3) & ~std::uint64_t{3});
  program.data_image.assign(data.begin(), data.end());

  auto exit = program.labels.find(kExitLabel);
  if (exit == program.labels.end())
    throw Error(ErrorCode::UndefinedLabel, "program was not wrapped with the kernel (missing __exit)");
  program.exit_address = exit->second;
  program.kernel_prefix_length = static_cast<std::size_t>(
      std::count_if(program.text_image.begin(), program.text_image.end(), [&](const TextWord& w) {
        return program.items[w.item_index].is_kernel && w.address < program.exit_address;
      }));
  return program;
}

namespace {

std::string describe_errors(const std::vector<ProgramItem>& errors) {
  std::string out = fmt::format("{} assembly error{}", errors.size(), errors.size() == 1 ? "" : "s");
  for (const auto& e : errors) out += fmt::format("\n  line {}: {}", e.line, e.error_message);
  return out;
}

}  // namespace

AssemblyFailed::AssemblyFailed(std::vector<ProgramItem> errors)
    : Error(ErrorCode::AssemblyHasErrors, describe_errors(errors),
            errors.empty() ? std::nullopt : std::optional<int>(errors.front().line)),
      errors_(std::move(errors)) {}

AssembledProgram assemble(std::string_view user_source, const KernelConfig& config) {
  const auto source = wrap_with_kernel(user_source, config);
  auto parsed = parse(source, config);
  if (parsed.has_errors()) throw AssemblyFailed(parsed.errors());
  return resolve_and_encode(parsed, config);
}

}  // namespace rvwb
