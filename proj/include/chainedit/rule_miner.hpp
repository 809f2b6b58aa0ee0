#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "chainedit/candidate_rule.hpp"
#include "chainedit/kg_store.hpp"

namespace chainedit::mining {

struct MiningConfig {
  std::size_t sample_n = 10000;
  /// Support threshold; unset means max(5, ceil(0.5% of the sample size)).
  std::optional<std::size_t> gamma;
  int max_hops = 2;
  std::uint64_t seed = 0;
  /// Neighbours expanded per entity at each intermediate hop. The closing
  /// edge into the instance's object is always looked up exhaustively.
  std::size_t degree_cap = 256;
  /// Worker threads for mine_all; 0 picks the hardware concurrency.
  unsigned threads = 0;

  void validate() const;
  std::size_t effective_gamma(std::size_t sample_size) const;
};

/// Rules `r <- inverse:r'` for every r' with (b, r', a) present for at least
/// gamma of the sampled (a, r, b).
std::vector<CandidateRule> mine_inverse(const kg::TripleStore& store, const std::string& relation,
                                        const MiningConfig& cfg);

/// Forward 2-hop (and 3-hop when max_hops == 3) relation paths between the
/// endpoints of sampled (a, r, b) facts. A path counts once per instance.
/// Sorted by descending support, ties by body.
std::vector<CandidateRule> mine_paths(const kg::TripleStore& store, const std::string& relation,
                                      const MiningConfig& cfg);

/// mine_inverse and mine_paths for every target, deduplicated on
/// (head, body) keeping the first occurrence. Targets run in parallel.
std::vector<CandidateRule> mine_all(const kg::TripleStore& store, const std::vector<std::string>& targets,
                                    const MiningConfig& cfg);

/// Canonical ordering used for mined output: support descending, then body.
bool rule_order(const CandidateRule& a, const CandidateRule& b);

}  // namespace chainedit::mining
