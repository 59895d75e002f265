#include "qlens/toy/task.hpp"

#include <numeric>

#include "qlens/error.hpp"

namespace qlens::toy {

void validate(const TaskSpec& task, const ModelConfig& config) {
  require(task.seq_len >= 4 && task.seq_len <= config.context, ErrorKind::kInvalidArgument,
          "task seq_len must be in [4, context]");
  switch (task.kind) {
    case TaskKind::kCopy:
      require(task.seq_len % 2 == 0, ErrorKind::kInvalidArgument, "copy task needs an even seq_len");
      break;
    case TaskKind::kInduction:
      require(config.vocab >= task.seq_len / 2 + 1, ErrorKind::kInvalidArgument,
              "induction task needs vocab > seq_len / 2");
      break;
    case TaskKind::kModularAdd:
      require(task.modulus >= 2 && task.modulus + 1 <= config.vocab, ErrorKind::kInvalidArgument,
              "modular-add needs 2 <= modulus < vocab");
      break;
  }
}

std::string to_string(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCopy: return "copy";
    case TaskKind::kInduction: return "induction";
    case TaskKind::kModularAdd: return "modadd";
  }
  return "?";
}

TaskKind parse_task_kind(const std::string& text) {
  if (text == "copy") return TaskKind::kCopy;
  if (text == "induction") return TaskKind::kInduction;
  if (text == "modadd" || text == "modular-add") return TaskKind::kModularAdd;
  fail(ErrorKind::kInvalidArgument, "unknown task '" + text + "'");
}

Batch make_batch(const TaskSpec& task, const ModelConfig& config, std::size_t batch, RngStream& rng) {
  validate(task, config);
  require(batch > 0, ErrorKind::kInvalidArgument, "batch must be positive");
  const std::size_t t_len = task.seq_len;
  Batch b{batch, t_len, std::vector<std::int32_t>(batch * t_len, 0),
          std::vector<std::int32_t>(batch * t_len, kIgnore)};
  const auto vocab = config.vocab;
  for (std::size_t s = 0; s < batch; ++s) {
    std::int32_t* tok = b.tokens.data() + s * t_len;
    std::int32_t* tgt = b.targets.data() + s * t_len;
    switch (task.kind) {
      case TaskKind::kCopy: {
        const std::size_t half = t_len / 2;
        for (std::size_t i = 0; i < half; ++i) {
          tok[i] = static_cast<std::int32_t>(rng.below(vocab));
          tok[i + half] = tok[i];
        }
        // position i predicts token i+1; from half-1 on the next token is a repeat
        for (std::size_t i = half - 1; i + 1 < t_len; ++i) tgt[i] = tok[i + 1];
        break;
      }
      case TaskKind::kInduction: {
        const std::size_t half = t_len / 2;
        std::vector<std::int32_t> pool(vocab);
        std::iota(pool.begin(), pool.end(), 0);
        for (std::size_t i = 0; i < half; ++i) {
          std::swap(pool[i], pool[i + rng.below(vocab - i)]);
          tok[i] = pool[i];
        }
        for (std::size_t i = half; i < t_len; ++i) {
          const std::size_t j = rng.below(half - 1);
          tok[i] = tok[j];
          tgt[i] = tok[j + 1];
        }
        break;
      }
      case TaskKind::kModularAdd: {
        const auto m = static_cast<std::int32_t>(task.modulus);
        for (std::size_t i = 0; i + 3 < t_len; i += 4) {
          const auto a = static_cast<std::int32_t>(rng.below(task.modulus));
          const auto c = static_cast<std::int32_t>(rng.below(task.modulus));
          tok[i] = a;
          tok[i + 1] = c;
          tok[i + 2] = m;
          tok[i + 3] = (a + c) % m;
          tgt[i + 2] = tok[i + 3];
        }
        break;
      }
    }
  }
  return b;
}

}  // namespace qlens::toy
