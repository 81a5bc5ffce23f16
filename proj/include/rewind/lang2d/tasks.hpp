#pragma once

#include <string>
#include <vector>

#include "rewind/data/types.hpp"

namespace rewindrl::lang2d {

// Fixed task registry: 20 train tasks, 8 unseen tasks recombining seen
// verbs with novel objects/directions, and a 40-task broad proxy registry
// with its own instruction phrasings.
struct TaskRegistry {
  std::vector<data::TaskSpec> train;
  std::vector<data::TaskSpec> unseen;
  std::vector<data::TaskSpec> proxy;

  const data::TaskSpec& find(const std::string& task_id) const;
  bool has(const std::string& task_id) const;
  std::vector<const data::TaskSpec*> targets() const;  // train + unseen
};

TaskRegistry build_registry();

// Deterministic paraphrase bank standing in for LLM instruction
// generation: 9 additional phrasings per task.
std::vector<std::string> generate_paraphrases(const data::TaskSpec& task);

}  // namespace rewindrl::lang2d
