#pragma once

// Tri-directional fusion layer.
//
//   H_I' = tanh(flatten(H_I))            P_I = softmax(H_I' W_I + b_I)
//   H_D' = tanh(flatten(H_D))            P_D = softmax(H_D' W_D + b_D)
//   S_slot = H_S (+) P_I' (+) P_D'       P_S = softmax(S_slot W_slot + b_slot)
//   S = flatten(H_S) (+) H_I' (+) H_D'   I = softmax(S W_cI + b_cI)
//                                        D = softmax(S W_cD + b_cD)
//
// (+) is feature concatenation; P_I', P_D' repeat the distributions at every
// position. flatten(H_S) enters S without tanh.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trinlu/encoder.hpp"
#include "trinlu/tri_encoder.hpp"

namespace trinlu {

struct JointHeadDims {
  std::size_t length = 20;  // n
  std::size_t d = 768;
  std::size_t slots = 0;    // n_s
  std::size_t intents = 0;  // n_i
  std::size_t domains = 0;  // n_d
};

struct JointHeadParams {
  Linear intent;         // (n d) x n_i
  Linear domain;         // (n d) x n_d
  Linear slot;           // (d + n_i + n_d) x n_s
  Linear concat_intent;  // (3 n d) x n_i
  Linear concat_domain;  // (3 n d) x n_d
  JointHeadDims dims;

  static JointHeadParams create(ParameterStore& store, const JointHeadDims& dims);
  static std::size_t parameter_count(const JointHeadDims& dims);
};

struct BranchOutput {
  Var activated;      // tanh(flatten(H)), [B, n d]
  Var distribution;   // [B, classes]
};

BranchOutput intent_branch(Graph& g, Var h_intent, const JointHeadParams& params);
BranchOutput domain_branch(Graph& g, Var h_domain, const JointHeadParams& params);

/// Per-token slot distributions [B, n, n_s].
Var slot_fusion(Graph& g, Var h_slot, Var p_intent, Var p_domain, const JointHeadParams& params);

struct FinalDistributions {
  Var intent;  // [B, n_i]
  Var domain;  // [B, n_d]
};

FinalDistributions final_intent_domain(Graph& g, Var h_slot, Var intent_activated,
                                       Var domain_activated, const JointHeadParams& params);

struct JointOutput {
  Var slots;          // P_S
  Var intent;         // I
  Var domain;         // D
  Var intent_prior;   // P_I
  Var domain_prior;   // P_D
};

JointOutput joint_head(Graph& g, const TriHidden& hidden, const JointHeadParams& params);

/// Subset of {SF, ID, DC} contributing to the loss.
struct TaskSet {
  bool slot = true;
  bool intent = true;
  bool domain = true;

  bool empty() const { return !slot && !intent && !domain; }
  bool operator==(const TaskSet&) const = default;
  /// "SF+ID+DC" style label in the canonical SF, ID, DC order.
  std::string label() const;
  static TaskSet parse(std::string_view text);
  static std::vector<TaskSet> ablation_subsets();
};

struct JointTargets {
  std::vector<int> slots;  // B * n, row-major; ignored at PAD positions
  std::vector<int> intents;
  std::vector<int> domains;
  std::vector<std::uint8_t> pad;  // B * n
};

/// mean over non-PAD tokens of CE(P_S) + CE(I) + CE(D), each term gated by
/// tasks, averaged over the batch.
Var joint_loss(const JointOutput& out, const JointTargets& targets, const TaskSet& tasks);

}  // namespace trinlu
