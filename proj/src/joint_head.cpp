#include "trinlu/joint_head.hpp"

#include <algorithm>

#include "trinlu/error.hpp"

namespace trinlu {

JointHeadParams JointHeadParams::create(ParameterStore& store, const JointHeadDims& dims) {
  if (dims.slots == 0 || dims.intents == 0 || dims.domains == 0)
    throw ConfigError("label inventories must be non-empty");
  const std::size_t flat = dims.length * dims.d;
  JointHeadParams p;
  p.dims = dims;
  p.intent = Linear::create(store, "head.intent", flat, dims.intents);
  p.domain = Linear::create(store, "head.domain", flat, dims.domains);
  p.slot = Linear::create(store, "head.slot", dims.d + dims.intents + dims.domains, dims.slots);
  p.concat_intent = Linear::create(store, "head.concat_intent", 3 * flat, dims.intents);
  p.concat_domain = Linear::create(store, "head.concat_domain", 3 * flat, dims.domains);
  return p;
}

std::size_t JointHeadParams::parameter_count(const JointHeadDims& dims) {
  const std::size_t flat = dims.length * dims.d;
  return (flat + 1) * dims.intents + (flat + 1) * dims.domains +
         (dims.d + dims.intents + dims.domains + 1) * dims.slots +
         (3 * flat + 1) * dims.intents + (3 * flat + 1) * dims.domains;
}

namespace {

void expect_hidden(Var h, const JointHeadDims& dims, const char* what) {
  const Shape& s = h.shape();
  if (s.size() != 3 || s[1] != dims.length || s[2] != dims.d)
    throw ShapeError(std::string(what) + " must be [B, " + std::to_string(dims.length) + ", " +
                     std::to_string(dims.d) + "], got " + shape_string(s));
}

BranchOutput branch(Graph& g, Var hidden, const Linear& linear, const JointHeadDims& dims,
                    const char* what) {
  expect_hidden(hidden, dims, what);
  Var activated = tanh(flatten(hidden));
  return {activated, softmax(linear(g, activated))};
}

}  // namespace

BranchOutput intent_branch(Graph& g, Var h_intent, const JointHeadParams& params) {
  return branch(g, h_intent, params.intent, params.dims, "intent encoder output");
}

BranchOutput domain_branch(Graph& g, Var h_domain, const JointHeadParams& params) {
  return branch(g, h_domain, params.domain, params.dims, "domain encoder output");
}

Var slot_fusion(Graph& g, Var h_slot, Var p_intent, Var p_domain, const JointHeadParams& params) {
  const JointHeadDims& dims = params.dims;
  expect_hidden(h_slot, dims, "slot encoder output");
  const std::size_t batch = h_slot.shape()[0];
  if (p_intent.shape() != Shape{batch, dims.intents} ||
      p_domain.shape() != Shape{batch, dims.domains})
    throw ShapeError("intent/domain distributions " + shape_string(p_intent.shape()) + ", " +
                     shape_string(p_domain.shape()) + " do not match the configured label counts");
  Var fused = concat({h_slot, repeat_positions(p_intent, dims.length),
                      repeat_positions(p_domain, dims.length)},
                     2);
  return softmax(params.slot(g, fused));
}

FinalDistributions final_intent_domain(Graph& g, Var h_slot, Var intent_activated,
                                       Var domain_activated, const JointHeadParams& params) {
  expect_hidden(h_slot, params.dims, "slot encoder output");
  Var combined = concat({flatten(h_slot), intent_activated, domain_activated}, 1);
  return {softmax(params.concat_intent(g, combined)), softmax(params.concat_domain(g, combined))};
}

JointOutput joint_head(Graph& g, const TriHidden& hidden, const JointHeadParams& params) {
  const BranchOutput intent = intent_branch(g, hidden.intent, params);
  const BranchOutput domain = domain_branch(g, hidden.domain, params);
  Var slots = slot_fusion(g, hidden.slot, intent.distribution, domain.distribution, params);
  const FinalDistributions final =
      final_intent_domain(g, hidden.slot, intent.activated, domain.activated, params);
  return {slots, final.intent, final.domain, intent.distribution, domain.distribution};
}

std::string TaskSet::label() const {
  std::string out;
  auto append = [&out](const char* name) {
    if (!out.empty()) out += "+";
    out += name;
  };
  if (slot) append("SF");
  if (intent) append("ID");
  if (domain) append("DC");
  return out;
}

TaskSet TaskSet::parse(std::string_view text) {
  TaskSet tasks{false, false, false};
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find_first_of("+,", start);
    if (end == std::string_view::npos) end = text.size();
    std::string part(text.substr(start, end - start));
    std::transform(part.begin(), part.end(), part.begin(), ::toupper);
    if (part == "SF")
      tasks.slot = true;
    else if (part == "ID")
      tasks.intent = true;
    else if (part == "DC")
      tasks.domain = true;
    else if (!part.empty())
      throw ConfigError("unknown task '" + part + "' (SF, ID, DC)");
    start = end + 1;
  }
  if (tasks.empty()) throw ConfigError("at least one task must be active");
  return tasks;
}

std::vector<TaskSet> TaskSet::ablation_subsets() {
  return {{true, false, false}, {false, true, false}, {true, true, false},
          {true, false, true},  {false, true, true},  {true, true, true}};
}

Var joint_loss(const JointOutput& out, const JointTargets& targets, const TaskSet& tasks) {
  if (tasks.empty()) throw ConfigError("joint loss needs at least one active task");
  const Shape& slot_shape = out.slots.shape();
  const std::size_t batch = slot_shape[0], length = slot_shape[1];
  if (targets.slots.size() != batch * length || targets.pad.size() != batch * length ||
      targets.intents.size() != batch || targets.domains.size() != batch)
    throw ShapeError("targets do not match a batch of " + std::to_string(batch) + "x" +
                     std::to_string(length));
  const double inv_batch = 1.0 / static_cast<double>(batch);
  std::vector<Var> terms;
  if (tasks.slot) {
    std::vector<int> slot_targets(batch * length, -1);
    std::vector<double> weights(batch * length, 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
      std::size_t real = 0;
      for (std::size_t t = 0; t < length; ++t) real += targets.pad[b * length + t] ? 0 : 1;
      if (real == 0) throw DataError("utterance " + std::to_string(b) + " is all padding");
      for (std::size_t t = 0; t < length; ++t) {
        const std::size_t i = b * length + t;
        if (targets.pad[i]) continue;
        slot_targets[i] = targets.slots[i];
        weights[i] = inv_batch / static_cast<double>(real);
      }
    }
    terms.push_back(cross_entropy(out.slots, slot_targets, weights));
  }
  const std::vector<double> per_item(batch, inv_batch);
  if (tasks.intent) terms.push_back(cross_entropy(out.intent, targets.intents, per_item));
  if (tasks.domain) terms.push_back(cross_entropy(out.domain, targets.domains, per_item));
  Var total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = add(total, terms[i]);
  return total;
}

}  // namespace trinlu
