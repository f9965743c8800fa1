#pragma once

// Kernel wrapping, two-pass parsing, pseudo-instruction expansion, data
// directives, and label resolution into encodable text/data images.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rvwb/isa.hpp"

namespace rvwb {

struct KernelConfig {
  Word text_base = 0x00000000;
  Word data_base = 0x10000000;
  Word stack_top = 0x7FFFFFF0;

  /// Throws Error(InvalidConfig) unless text_base < data_base < stack_top, all 4-aligned.
  void validate() const;

  friend bool operator==(const KernelConfig&, const KernelConfig&) = default;
};

inline constexpr std::string_view kExitLabel = "__exit";

/// Kernel prefix + user source + kernel suffix, with the line ranges needed
/// to tell kernel lines from user lines.
struct CombinedSource {
  std::string text;
  int prefix_lines = 0;  // lines 1..prefix_lines are kernel
  int user_lines = 0;    // followed by this many user lines
  int suffix_lines = 0;  // then kernel again

  int total_lines() const { return prefix_lines + user_lines + suffix_lines; }
  bool is_kernel_line(int line) const { return line <= prefix_lines || line > prefix_lines + user_lines; }
  /// Line number within the user's file, or nullopt for kernel lines.
  std::optional<int> user_line(int line) const;
};

CombinedSource wrap_with_kernel(std::string_view user_source, const KernelConfig& config = {});

enum class ItemKind { instruction, label, pseudo, directive, error };

const char* to_string(ItemKind kind);

struct ProgramItem {
  std::vector<std::string> symbols;
  ItemKind kind = ItemKind::error;
  int line = 0;
  std::optional<Word> address;
  bool is_kernel = false;
  std::string error_message;

  friend bool operator==(const ProgramItem&, const ProgramItem&) = default;
};

/// Source-like rendering of an item, e.g. "lw x5, 8(x2)" or "loop:".
std::string format_item(const ProgramItem& item);

using LabelMap = std::map<std::string, Word, std::less<>>;

struct ParseResult {
  std::vector<ProgramItem> items;
  LabelMap labels;

  bool has_errors() const;
  std::vector<ProgramItem> errors() const;
};

/// Two-pass parse. Never throws on bad input: malformed lines become error items.
ParseResult parse(const CombinedSource& source, const KernelConfig& config = {});

bool is_pseudo_mnemonic(std::string_view mnemonic);

/// Expands a pseudo item into base-instruction items that keep its line
/// number; addresses follow on from item.address when present.
/// Throws Error(ImmediateOutOfRange / MalformedOperand / UnknownRegister).
std::vector<ProgramItem> expand_pseudo(const ProgramItem& item);

enum class Segment { text, data };

struct DirectiveResult {
  std::optional<Segment> switch_to;
  Word start = 0;  // address of the first emitted byte, after alignment
  std::vector<std::uint8_t> bytes;
  Word cursor = 0;  // data cursor after emission
};

/// Throws Error(UnknownDirective / MalformedOperand).
DirectiveResult process_directive(const ProgramItem& item, Word cursor);

struct TextWord {
  Word address;
  Word word;
  std::size_t item_index;  // into AssembledProgram::items

  friend bool operator==(const TextWord&, const TextWord&) = default;
};

struct AssembledProgram {
  std::vector<ProgramItem> items;
  LabelMap labels;
  std::vector<TextWord> text_image;
  std::vector<std::pair<Word, Word>> data_image;
  Word entry_address = 0;
  Word exit_address = 0;
  Word text_base = 0;
  Word text_end = 0;  // one past the last instruction
  Word data_base = 0;
  Word data_end = 0;
  std::size_t kernel_prefix_length = 0;  // instructions executed before the first user line

  bool is_instruction_address(Word address) const;
  const TextWord* text_word_at(Word address) const;
};

/// Resolves label operands and encodes every instruction.
/// Throws Error(AssemblyHasErrors / UndefinedLabel / BranchOutOfRange).
AssembledProgram resolve_and_encode(const ParseResult& parsed, const KernelConfig& config = {});

/// Thrown by assemble() when parsing produced error items.
class AssemblyFailed : public Error {
 public:
  explicit AssemblyFailed(std::vector<ProgramItem> errors);
  const std::vector<ProgramItem>& errors() const noexcept { return errors_; }

 private:
  std::vector<ProgramItem> errors_;
};

/// wrap_with_kernel + parse + resolve_and_encode.
AssembledProgram assemble(std::string_view user_source, const KernelConfig& config = {});

/// Builds the operand fields for a base instruction from its source symbols.
/// With `labels == nullptr` label references are only checked for syntax.
DecodedInstruction build_instruction(const std::vector<std::string>& symbols, Word address,
                                     const LabelMap* labels, int line = 0);

std::optional<std::int64_t> parse_integer(std::string_view token);

}  // namespace rvwb
