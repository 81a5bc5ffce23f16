#include "rewind/lang2d/tasks.hpp"

#include <algorithm>
#include <set>

#include "rewind/rng.hpp"

#include "rewind/lang2d/env.hpp"

namespace rewindrl::lang2d {

using data::Family;
using data::Instruction;
using data::Origin;
using data::Split;
using data::TaskSpec;

namespace {

std::string task_name(Family f, const std::string& color,
                      const std::string& shape, const std::string& dir) {
  std::string id = std::string(data::family_name(f)) + "-" + color + "-" + shape;
  if (dir != "none") id += "-" + dir;
  return id;
}

std::string original_instruction(const TaskSpec& t) {
  switch (t.family) {
    case Family::reach:
      return "reach the " + t.color + " " + t.shape;
    case Family::push:
      return "push the " + t.color + " " + t.shape + " to the " + t.direction;
    case Family::pull:
      return "pull the " + t.color + " " + t.shape + " to the " + t.direction;
    case Family::pick_place:
      return "put the " + t.color + " " + t.shape + " in the " + t.direction +
             " bin";
  }
  return "";
}

// Broad phrasing bank for the proxy corpus; one variant per stored episode
// mimics the natural instruction diversity of off-the-shelf data.
std::string proxy_instruction(const TaskSpec& t, int variant) {
  const std::string obj = variant % 3 == 2
                              ? t.shape + " that is " + t.color
                              : t.color + " " + t.shape;
  const std::string d = t.direction;
  const std::vector<std::string> dir_phrase = {
      "to the " + d, "toward the " + d, d + "ward", "to the " + d + " side"};
  const std::string dp = dir_phrase[variant % dir_phrase.size()];
  switch (t.family) {
    case Family::reach: {
      static const std::vector<std::string> verbs = {
          "move to", "go to",       "approach", "head to",  "touch",
          "get to",  "navigate to", "reach for", "close in on", "reach"};
      return verbs[variant % verbs.size()] + " the " + obj;
    }
    case Family::push: {
      static const std::vector<std::string> verbs = {
          "slide", "shove", "nudge", "press", "move", "force", "bump",
          "shift", "push", "slide"};
      return verbs[variant % verbs.size()] + " the " + obj + " " + dp;
    }
    case Family::pull: {
      static const std::vector<std::string> verbs = {
          "drag", "tug", "haul", "draw", "bring", "yank", "retract",
          "pull", "drag", "pull"};
      return verbs[variant % verbs.size()] + " the " + obj + " " + dp;
    }
    case Family::pick_place: {
      static const std::vector<std::string> verbs = {
          "drop", "place", "set", "deposit", "stick", "carry", "move",
          "put", "insert", "transfer"};
      const std::string bin = variant % 2 ? "into the " + d + " bin"
                                          : "in the bin on the " + d;
      return verbs[variant % verbs.size()] + " the " + obj + " " + bin;
    }
  }
  return "";
}

TaskSpec make_task(Family f, const std::string& color, const std::string& shape,
                   const std::string& dir, Split split) {
  TaskSpec t;
  t.family = f;
  t.color = color;
  t.shape = shape;
  t.direction = dir;
  t.split = split;
  t.task_id = task_name(f, color, shape, dir);
  t.instructions.push_back(
      Instruction{t.task_id, original_instruction(t), Origin::original});
  return t;
}

}  // namespace

const TaskSpec& TaskRegistry::find(const std::string& task_id) const {
  for (const auto* list : {&train, &unseen, &proxy})
    for (const auto& t : *list)
      if (t.task_id == task_id) return t;
  throw invalid_input("unknown task_id: " + task_id);
}

bool TaskRegistry::has(const std::string& task_id) const {
  for (const auto* list : {&train, &unseen, &proxy})
    for (const auto& t : *list)
      if (t.task_id == task_id) return true;
  return false;
}

std::vector<const TaskSpec*> TaskRegistry::targets() const {
  std::vector<const TaskSpec*> out;
  for (const auto& t : train) out.push_back(&t);
  for (const auto& t : unseen) out.push_back(&t);
  return out;
}

TaskRegistry build_registry() {
  TaskRegistry reg;
  auto& tr = reg.train;
  // 20 train tasks: directions restricted to {left, up}, colors to the
  // first five, shapes to block/ball. Unseen tasks recombine the same verbs
  // with the held-out directions, colors, and shapes.
  tr.push_back(make_task(Family::reach, "red", "block", "none", Split::train));
  tr.push_back(make_task(Family::reach, "green", "ball", "none", Split::train));
  tr.push_back(make_task(Family::reach, "blue", "block", "none", Split::train));
  tr.push_back(make_task(Family::reach, "yellow", "ball", "none", Split::train));
  tr.push_back(make_task(Family::push, "red", "block", "left", Split::train));
  tr.push_back(make_task(Family::push, "green", "ball", "left", Split::train));
  tr.push_back(make_task(Family::push, "blue", "block", "up", Split::train));
  tr.push_back(make_task(Family::push, "yellow", "ball", "up", Split::train));
  tr.push_back(make_task(Family::push, "purple", "block", "left", Split::train));
  tr.push_back(make_task(Family::push, "green", "block", "up", Split::train));
  tr.push_back(make_task(Family::pull, "red", "ball", "left", Split::train));
  tr.push_back(make_task(Family::pull, "blue", "ball", "up", Split::train));
  tr.push_back(make_task(Family::pull, "green", "block", "left", Split::train));
  tr.push_back(make_task(Family::pull, "yellow", "block", "up", Split::train));
  tr.push_back(make_task(Family::pull, "purple", "ball", "left", Split::train));
  tr.push_back(make_task(Family::pick_place, "red", "block", "left", Split::train));
  tr.push_back(make_task(Family::pick_place, "green", "ball", "up", Split::train));
  tr.push_back(make_task(Family::pick_place, "blue", "ball", "left", Split::train));
  tr.push_back(make_task(Family::pick_place, "yellow", "block", "up", Split::train));
  tr.push_back(make_task(Family::pick_place, "purple", "ball", "up", Split::train));

  auto& un = reg.unseen;
  un.push_back(make_task(Family::push, "red", "block", "right", Split::unseen));
  un.push_back(make_task(Family::pull, "green", "block", "down", Split::unseen));
  un.push_back(make_task(Family::reach, "orange", "block", "none", Split::unseen));
  un.push_back(make_task(Family::push, "cyan", "ball", "left", Split::unseen));
  un.push_back(make_task(Family::pick_place, "blue", "ball", "right", Split::unseen));
  un.push_back(make_task(Family::reach, "pink", "star", "none", Split::unseen));
  un.push_back(make_task(Family::pull, "orange", "ball", "up", Split::unseen));
  un.push_back(make_task(Family::pick_place, "green", "ball", "down", Split::unseen));

  // 40 proxy tasks. A fixed block covers every (family, direction) pair and
  // the colors/shapes held out of training; the remainder is a seeded
  // pseudo-random scatter over the full product, skipping target triples.
  std::set<std::string> taken;
  for (const auto* list : {&reg.train, &reg.unseen})
    for (const auto& t : *list) taken.insert(t.task_id);

  const std::vector<std::string> dirs = {"left", "right", "up", "down"};
  const std::vector<Family> fams = {Family::push, Family::pull,
                                    Family::pick_place};
  auto add_proxy = [&](Family f, const std::string& color,
                       const std::string& shape, const std::string& dir) {
    const std::string id = task_name(f, color, shape, dir);
    if (taken.count(id)) return false;
    taken.insert(id);
    TaskSpec t;
    t.family = f;
    t.color = color;
    t.shape = shape;
    t.direction = dir;
    t.split = Split::train;
    t.task_id = "px-" + id;
    // Ten stored phrasings per proxy task, deduplicated; episodes cycle
    // through them so the corpus carries instruction diversity the way
    // off-the-shelf data does.
    for (int v = 0; v < 12 && int(t.instructions.size()) < 10; ++v) {
      const std::string text = proxy_instruction(t, v);
      const bool dup =
          std::any_of(t.instructions.begin(), t.instructions.end(),
                      [&](const auto& i) { return i.text == text; });
      if (!dup)
        t.instructions.push_back(Instruction{t.task_id, text, Origin::original});
    }
    reg.proxy.push_back(t);
    return true;
  };

  int i = 0;
  for (const auto f : fams)
    for (const auto& dir : dirs) {
      add_proxy(f, kColors[i % kColors.size()], kShapes[i % kShapes.size()], dir);
      ++i;
    }
  for (const auto& color : {"orange", "cyan", "pink", "purple"})
    add_proxy(Family::reach, color, kShapes[i++ % kShapes.size()], "none");

  Rng scatter(424242);
  while (int(reg.proxy.size()) < 40) {
    const Family f = static_cast<Family>(scatter.uniform_int(std::uint64_t(4)));
    const auto& color = kColors[scatter.uniform_int(std::uint64_t(kColors.size()))];
    const auto& shape = kShapes[scatter.uniform_int(std::uint64_t(kShapes.size()))];
    const std::string dir =
        f == Family::reach ? "none" : dirs[scatter.uniform_int(std::uint64_t(4))];
    add_proxy(f, color, shape, dir);
  }
  return reg;
}

std::vector<std::string> generate_paraphrases(const TaskSpec& task) {
  static const std::vector<std::string> reach_verbs = {
      "touch",   "approach", "go to",      "move to", "get to",
      "head to", "reach for", "close in on", "navigate to"};
  static const std::vector<std::string> push_verbs = {
      "shove", "slide", "nudge", "press", "move", "force", "bump", "shift",
      "push"};
  static const std::vector<std::string> pull_verbs = {
      "drag", "draw", "tug", "haul", "bring", "yank", "retract", "slide",
      "pull"};
  static const std::vector<std::string> put_verbs = {
      "place", "drop", "move", "set", "stick", "deposit", "insert", "carry",
      "put"};

  const std::string obj_a = task.color + " " + task.shape;
  const std::string obj_b = task.shape + " that is " + task.color;

  std::vector<std::string> out;
  auto add = [&](const std::string& s) {
    if (s != task.instructions.front().text &&
        std::find(out.begin(), out.end(), s) == out.end())
      out.push_back(s);
  };
  for (int k = 0; int(out.size()) < 9 && k < 32; ++k) {
    const std::string& obj = (k % 3 == 2) ? obj_b : obj_a;
    switch (task.family) {
      case Family::reach: {
        const auto& v = reach_verbs[k % reach_verbs.size()];
        add(v + " the " + obj);
        break;
      }
      case Family::push: {
        const auto& v = push_verbs[k % push_verbs.size()];
        const std::string d = (k % 2) ? task.direction + "ward"
                                      : "to the " + task.direction;
        add(v + " the " + obj + " " + d);
        break;
      }
      case Family::pull: {
        const auto& v = pull_verbs[k % pull_verbs.size()];
        const std::string d = (k % 2) ? "toward the " + task.direction
                                      : "to the " + task.direction;
        add(v + " the " + obj + " " + d);
        break;
      }
      case Family::pick_place: {
        const auto& v = put_verbs[k % put_verbs.size()];
        const std::string d = (k % 2) ? "into the " + task.direction + " bin"
                                      : "in the bin on the " + task.direction;
        add(v + " the " + obj + " " + d);
        break;
      }
    }
  }
  return out;
}

}  // namespace rewindrl::lang2d
