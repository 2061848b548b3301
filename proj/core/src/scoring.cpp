#include "threathive/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include <spdlog/spdlog.h>

#include "threathive/error.hpp"

namespace threathive {

namespace {

bool one_of(double value, std::initializer_list<double> allowed) {
  return std::any_of(allowed.begin(), allowed.end(), [value](double a) { return a == value; });
}

void require_finite(double v, const char* name) {
  if (!std::isfinite(v)) {
    fail(ErrorKind::Validation, std::string(name) + " must be finite", name);
  }
}

}  // namespace

void validate(const RiskFactors& f) {
  if (f.severity < 1 || f.severity > 7) {
    fail(ErrorKind::Validation, "severity L must be an integer in 1..7, got " + std::to_string(f.severity), "L");
  }
  if (!(f.success_rate >= 0.0 && f.success_rate <= 1.0)) {
    fail(ErrorKind::Validation, "success rate S must lie in [0, 1], got " + std::to_string(f.success_rate), "S");
  }
  if (!one_of(f.persistence, {0.5, 0.75, 1.0})) {
    fail(ErrorKind::Validation, "persistence I must be one of {0.5, 0.75, 1.0}, got " + std::to_string(f.persistence),
         "I");
  }
  if (!one_of(f.ease, {0.33, 0.66, 1.0})) {
    fail(ErrorKind::Validation, "exploitation ease D must be one of {0.33, 0.66, 1.0}, got " + std::to_string(f.ease),
         "D");
  }
}

std::string_view to_string(ThreatFlag flag) noexcept {
  switch (flag) {
    case ThreatFlag::SemanticInferenceTime: return "SemanticInferenceTime";
    case ThreatFlag::ParasiticChaining: return "ParasiticChaining";
    case ThreatFlag::LowObservability: return "LowObservability";
  }
  return "?";
}

std::optional<ThreatFlag> parse_threat_flag(std::string_view text) noexcept {
  for (auto f : kAllThreatFlags) {
    if (to_string(f) == text) return f;
  }
  return std::nullopt;
}

std::vector<ThreatFlag> FlagSet::members() const {
  std::vector<ThreatFlag> out;
  for (auto f : kAllThreatFlags) {
    if (contains(f)) out.push_back(f);
  }
  return out;
}

void validate(const ScoringConfig& c) {
  const std::pair<double, const char*> weights[] = {{c.weight_severity, "w_L"},
                                                     {c.weight_success, "w_S"},
                                                     {c.weight_persistence, "w_I"},
                                                     {c.weight_ease, "w_D"}};
  for (auto [w, name] : weights) {
    require_finite(w, name);
    if (w < 0.0) fail(ErrorKind::Validation, "weights must be non-negative", name);
  }
  const std::pair<double, const char*> multipliers[] = {{c.multiplier_semantic, "multiplier_semantic"},
                                                         {c.multiplier_chaining, "multiplier_chaining"},
                                                         {c.multiplier_observability, "multiplier_observability"}};
  for (auto [m, name] : multipliers) {
    require_finite(m, name);
    if (m < 1.0) fail(ErrorKind::Validation, "priority multipliers must be >= 1", name);
  }
  require_finite(c.threshold_critical, "threshold_critical");
  require_finite(c.threshold_high, "threshold_high");
  require_finite(c.threshold_medium, "threshold_medium");
  if (!(c.threshold_critical > c.threshold_high && c.threshold_high > c.threshold_medium &&
        c.threshold_medium > 0.0)) {
    fail(ErrorKind::Validation, "thresholds must satisfy critical > high > medium > 0", "thresholds");
  }
  if (std::abs(c.weight_sum() - 1.0) > 1e-9) {
    spdlog::warn("scoring weights sum to {:.6f}; base score may exceed 1 before clamping", c.weight_sum());
  }
}

std::string_view to_string(RiskLevel level) noexcept {
  switch (level) {
    case RiskLevel::Low: return "Low";
    case RiskLevel::Medium: return "Medium";
    case RiskLevel::High: return "High";
    case RiskLevel::Critical: return "Critical";
  }
  return "?";
}

std::optional<RiskLevel> parse_risk_level(std::string_view text) noexcept {
  for (auto l : {RiskLevel::Low, RiskLevel::Medium, RiskLevel::High, RiskLevel::Critical}) {
    std::string_view name = to_string(l);
    if (name.size() == text.size() &&
        std::equal(name.begin(), name.end(), text.begin(), [](char a, char b) {
          return std::tolower(static_cast<unsigned char>(a)) == std::tolower(static_cast<unsigned char>(b));
        })) {
      return l;
    }
  }
  return std::nullopt;
}

double base_score(const RiskFactors& f, const ScoringConfig& c) {
  validate(f);
  return c.weight_severity * f.severity_norm() + c.weight_success * f.success_rate +
         c.weight_persistence * f.persistence + c.weight_ease * f.ease;
}

double priority_multiplier(FlagSet flags, const ScoringConfig& c) {
  double p = 1.0;
  if (flags.contains(ThreatFlag::SemanticInferenceTime)) p *= c.multiplier_semantic;
  if (flags.contains(ThreatFlag::ParasiticChaining)) p *= c.multiplier_chaining;
  if (flags.contains(ThreatFlag::LowObservability)) p *= c.multiplier_observability;
  return p;
}

ScoredRisk final_score(const RiskFactors& factors, FlagSet flags, const ScoringConfig& c) {
  ScoredRisk r;
  r.base = base_score(factors, c);
  r.multiplier = priority_multiplier(flags, c);
  r.final_score = std::min(10.0, (r.base * r.multiplier) * 10.0);
  r.level = classify_level(r.final_score, c);
  return r;
}

RiskLevel classify_level(double score, const ScoringConfig& c) {
  if (!(score >= 0.0 && score <= 10.0)) {
    fail(ErrorKind::Validation, "score must lie in [0, 10], got " + std::to_string(score), "score");
  }
  if (score >= c.threshold_critical) return RiskLevel::Critical;
  if (score >= c.threshold_high) return RiskLevel::High;
  if (score >= c.threshold_medium) return RiskLevel::Medium;
  return RiskLevel::Low;
}

}  // namespace threathive
