#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace threathive {

// DREAD-adapted factors for one threat.
struct RiskFactors {
  int severity = 1;             // L, 7-level scale 1..7
  double success_rate = 0.0;    // S in [0, 1]
  double persistence = 0.5;     // I: Transient 0.5, Session 0.75, Long-term 1.0
  double ease = 0.33;           // D: Insider-only 0.33, Moderate 0.66, Trivial 1.0

  double severity_norm() const noexcept { return static_cast<double>(severity) / 7.0; }

  friend bool operator==(const RiskFactors&, const RiskFactors&) = default;
};

// Throws Error{Validation} naming the first out-of-domain field.
void validate(const RiskFactors& factors);

enum class ThreatFlag : std::uint8_t {
  SemanticInferenceTime = 1U << 0,
  ParasiticChaining = 1U << 1,
  LowObservability = 1U << 2,
};

std::string_view to_string(ThreatFlag flag) noexcept;
std::optional<ThreatFlag> parse_threat_flag(std::string_view text) noexcept;

class FlagSet {
 public:
  constexpr FlagSet() noexcept = default;
  constexpr FlagSet(std::initializer_list<ThreatFlag> flags) noexcept {
    for (auto f : flags) bits_ |= static_cast<std::uint8_t>(f);
  }

  constexpr bool contains(ThreatFlag f) const noexcept { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
  constexpr void insert(ThreatFlag f) noexcept { bits_ |= static_cast<std::uint8_t>(f); }
  constexpr bool empty() const noexcept { return bits_ == 0; }
  constexpr std::uint8_t bits() const noexcept { return bits_; }

  constexpr FlagSet& operator|=(FlagSet other) noexcept {
    bits_ |= other.bits_;
    return *this;
  }
  friend constexpr FlagSet operator|(FlagSet a, FlagSet b) noexcept { return a |= b; }
  friend constexpr bool operator==(FlagSet, FlagSet) noexcept = default;

  std::vector<ThreatFlag> members() const;

 private:
  std::uint8_t bits_ = 0;
};

inline constexpr ThreatFlag kAllThreatFlags[] = {
    ThreatFlag::SemanticInferenceTime, ThreatFlag::ParasiticChaining, ThreatFlag::LowObservability};

struct ScoringConfig {
  double weight_severity = 0.35;
  double weight_success = 0.30;
  double weight_persistence = 0.20;
  double weight_ease = 0.15;

  double multiplier_semantic = 1.20;
  double multiplier_chaining = 1.15;
  double multiplier_observability = 1.10;

  double threshold_critical = 9.0;
  double threshold_high = 7.0;
  double threshold_medium = 4.0;

  double weight_sum() const noexcept {
    return weight_severity + weight_success + weight_persistence + weight_ease;
  }

  friend bool operator==(const ScoringConfig&, const ScoringConfig&) = default;
};

// Rejects negative weights, multipliers below 1 and unordered thresholds.
// A weight sum other than 1.0 is logged as a warning and accepted.
void validate(const ScoringConfig& config);

enum class RiskLevel { Low, Medium, High, Critical };

std::string_view to_string(RiskLevel level) noexcept;
std::optional<RiskLevel> parse_risk_level(std::string_view text) noexcept;

struct ScoredRisk {
  double base = 0.0;
  double multiplier = 1.0;
  double final_score = 0.0;
  RiskLevel level = RiskLevel::Low;

  friend bool operator==(const ScoredRisk&, const ScoredRisk&) = default;
};

// R = w_L * L/7 + w_S * S + w_I * I + w_D * D
double base_score(const RiskFactors& factors, const ScoringConfig& config = {});

// Product of the configured multiplier of every flag present; 1.0 when empty.
double priority_multiplier(FlagSet flags, const ScoringConfig& config = {});

// R_final = min(10, R * P * 10), level from classify_level.
ScoredRisk final_score(const RiskFactors& factors, FlagSet flags, const ScoringConfig& config = {});

// Lower bounds are inclusive: 9.0 is Critical, 7.0 High, 4.0 Medium.
RiskLevel classify_level(double score, const ScoringConfig& config = {});

}  // namespace threathive
