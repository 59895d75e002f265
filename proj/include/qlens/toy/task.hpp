#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qlens/rng.hpp"
#include "qlens/toy/config.hpp"

namespace qlens::toy {

enum class TaskKind { kCopy, kInduction, kModularAdd };

/// Synthetic next-token tasks. Every scored target is a deterministic
/// function of the tokens before it.
///  - Copy: a random half-sequence followed by a repeat of it; the repeat is scored.
///  - Induction: a prefix of distinct tokens, then queries drawn from the
///    prefix; each query is scored on the token that followed it in the prefix.
///  - ModularAdd(m): repeated "a b = c" quadruples with c = (a + b) mod m; the
///    position of "=" is scored on c. Token m is "=".
struct TaskSpec {
  TaskKind kind = TaskKind::kCopy;
  std::size_t seq_len = 32;
  std::size_t modulus = 16;

  bool operator==(const TaskSpec&) const = default;
};

void validate(const TaskSpec& task, const ModelConfig& config);
std::string to_string(TaskKind kind);
TaskKind parse_task_kind(const std::string& text);

inline constexpr std::int32_t kIgnore = -1;

/// tokens and targets are [batch, seq_len]; targets[i] is the token expected
/// after position i, or kIgnore when unscored.
struct Batch {
  std::size_t batch = 0;
  std::size_t seq_len = 0;
  std::vector<std::int32_t> tokens;
  std::vector<std::int32_t> targets;
};

Batch make_batch(const TaskSpec& task, const ModelConfig& config, std::size_t batch, RngStream& rng);

}  // namespace qlens::toy
