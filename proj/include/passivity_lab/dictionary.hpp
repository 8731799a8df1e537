#pragma once

#include <Eigen/Dense>

#include <cctype>
#include <cmath>
#include <string>
#include <vector>

#include "passivity_lab/errors.hpp"

namespace passivity_lab {

/// Basis-function kinds. Every kind vanishes at x = 0 together with its
/// gradient. New kinds need a value, a gradient, a name and a serialized tag
/// below; nothing else in the library switches on the kind.
enum class FeatureKind { square, cross, exp_sq, sin_sq, one_minus_cos };

struct Feature {
  FeatureKind kind;
  int i = 0;
  int j = -1;  // second index, cross only

  static Feature square(int i) { return {FeatureKind::square, i, -1}; }
  static Feature cross(int i, int j) { return {FeatureKind::cross, i, j}; }
  static Feature exp_sq(int i) { return {FeatureKind::exp_sq, i, -1}; }
  static Feature sin_sq(int i) { return {FeatureKind::sin_sq, i, -1}; }
  static Feature one_minus_cos(int i) { return {FeatureKind::one_minus_cos, i, -1}; }

  double value(const Eigen::VectorXd& x) const {
    const double a = x(i);
    switch (kind) {
      case FeatureKind::square: return a * a;
      case FeatureKind::cross: return a * x(j);
      case FeatureKind::exp_sq: {
        const double e = std::expm1(a);
        return e * e;
      }
      case FeatureKind::sin_sq: {
        const double s = std::sin(a);
        return s * s;
      }
      case FeatureKind::one_minus_cos: {
        // 2 sin^2(a/2) avoids cancellation near 0
        const double s = std::sin(0.5 * a);
        return 2.0 * s * s;
      }
    }
    return 0.0;
  }

  // Adds the gradient of this feature into `row` (length n).
  template <typename Row>
  void add_gradient(const Eigen::VectorXd& x, Row&& row) const {
    const double a = x(i);
    switch (kind) {
      case FeatureKind::square: row(i) += 2.0 * a; break;
      case FeatureKind::cross:
        row(i) += x(j);
        row(j) += a;
        break;
      case FeatureKind::exp_sq: row(i) += 2.0 * std::expm1(a) * std::exp(a); break;
      case FeatureKind::sin_sq: row(i) += std::sin(2.0 * a); break;
      case FeatureKind::one_minus_cos: row(i) += std::sin(a); break;
    }
  }

  std::string name() const {
    const auto v = [](int k) { return "x" + std::to_string(k + 1); };
    switch (kind) {
      case FeatureKind::square: return v(i) + "^2";
      case FeatureKind::cross: return v(i) + "*" + v(j);
      case FeatureKind::exp_sq: return "(exp(" + v(i) + ")-1)^2";
      case FeatureKind::sin_sq: return "sin(" + v(i) + ")^2";
      case FeatureKind::one_minus_cos: return "1-cos(" + v(i) + ")";
    }
    return {};
  }

  friend bool operator==(const Feature&, const Feature&) = default;
};

inline const char* kind_tag(FeatureKind k) {
  switch (k) {
    case FeatureKind::square: return "square";
    case FeatureKind::cross: return "cross";
    case FeatureKind::exp_sq: return "exp_sq";
    case FeatureKind::sin_sq: return "sin_sq";
    case FeatureKind::one_minus_cos: return "one_minus_cos";
  }
  return "";
}

inline FeatureKind kind_from_tag(const std::string& tag) {
  for (auto k : {FeatureKind::square, FeatureKind::cross, FeatureKind::exp_sq, FeatureKind::sin_sq,
                 FeatureKind::one_minus_cos})
    if (tag == kind_tag(k)) return k;
  throw ParseError("unknown feature kind '" + tag + "'");
}

/// Ordered list of features; S(x) = theta . phi(x).
struct Dictionary {
  std::vector<Feature> features;
  int state_dim = 0;

  static Dictionary make(std::vector<Feature> features, int state_dim) {
    if (state_dim < 1) throw ArgumentError("dictionary state dimension must be >= 1");
    if (features.empty()) throw ArgumentError("dictionary needs at least one feature");
    for (const auto& f : features) {
      const bool needs_j = f.kind == FeatureKind::cross;
      if (f.i < 0 || f.i >= state_dim || (needs_j && (f.j < 0 || f.j >= state_dim)))
        throw ArgumentError("feature index out of range: " + std::to_string(f.i));
    }
    return Dictionary{std::move(features), state_dim};
  }

  Eigen::Index size() const { return static_cast<Eigen::Index>(features.size()); }

  friend bool operator==(const Dictionary&, const Dictionary&) = default;
};

/// The nine-term pendulum dictionary: x1^2, x1 x2, x2^2, (e^x1-1)^2,
/// (e^x2-1)^2, sin^2 x1, sin^2 x2, 1-cos x1, 1-cos x2.
inline Dictionary pendulum_dictionary() {
  return Dictionary::make({Feature::square(0), Feature::cross(0, 1), Feature::square(1),
                           Feature::exp_sq(0), Feature::exp_sq(1), Feature::sin_sq(0),
                           Feature::sin_sq(1), Feature::one_minus_cos(0),
                           Feature::one_minus_cos(1)},
                          2);
}

inline Eigen::VectorXd eval_features(const Dictionary& dict, const Eigen::VectorXd& x) {
  Eigen::VectorXd phi(dict.size());
  for (Eigen::Index k = 0; k < dict.size(); ++k)
    phi(k) = dict.features[static_cast<std::size_t>(k)].value(x);
  return phi;
}

/// d x n matrix; row k is the gradient of feature k.
inline Eigen::MatrixXd eval_feature_gradients(const Dictionary& dict, const Eigen::VectorXd& x) {
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(dict.size(), dict.state_dim);
  for (Eigen::Index k = 0; k < dict.size(); ++k)
    dict.features[static_cast<std::size_t>(k)].add_gradient(x, grad.row(k));
  return grad;
}

// ---------------------------------------------------------------------------

enum class SupplyKind { passive, output_feedback, input_feedback };

inline const char* supply_tag(SupplyKind k) {
  switch (k) {
    case SupplyKind::passive: return "passive";
    case SupplyKind::output_feedback: return "OFP";
    case SupplyKind::input_feedback: return "IFP";
  }
  return "";
}

inline SupplyKind supply_from_tag(std::string tag) {
  for (auto& c : tag) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (tag == "PASSIVE") return SupplyKind::passive;
  if (tag == "OFP") return SupplyKind::output_feedback;
  if (tag == "IFP") return SupplyKind::input_feedback;
  throw ParseError("unknown supply kind '" + tag + "'");
}

struct EstimateDiagnostics {
  int window = 0;
  int constraint_count = 0;
  int solver_iterations = 0;
  int cuts_added = 0;
  int seed_cuts = 0;
  double min_psd_eigenvalue = 0.0;  // only meaningful for structural runs
};

/// theta together with the identified margin (rho for OFP, nu for IFP, 0 for
/// plain passivity). `pruned_mask` is empty until `prune` has been applied.
struct StorageEstimate {
  Dictionary dictionary;
  Eigen::VectorXd theta;
  double margin = 0.0;
  SupplyKind supply_kind = SupplyKind::output_feedback;
  std::vector<bool> pruned_mask;
  EstimateDiagnostics diagnostics;

  bool is_pruned() const { return !pruned_mask.empty(); }
  bool kept(Eigen::Index k) const {
    return pruned_mask.empty() || pruned_mask[static_cast<std::size_t>(k)];
  }
};

/// Marks the features whose coefficient magnitude is at least
/// `rel_threshold` times the largest one. Coefficients are not refit.
inline StorageEstimate prune(const StorageEstimate& est, double rel_threshold = 0.01) {
  const double largest = est.theta.cwiseAbs().maxCoeff();
  if (!(largest > 0.0)) throw DegenerateError("cannot prune an all-zero parameter vector");
  StorageEstimate out = est;
  out.pruned_mask.assign(static_cast<std::size_t>(est.theta.size()), false);
  const double cut = rel_threshold * largest;
  for (Eigen::Index k = 0; k < est.theta.size(); ++k)
    out.pruned_mask[static_cast<std::size_t>(k)] = std::abs(est.theta(k)) >= cut;
  return out;
}

inline Eigen::VectorXd effective_theta(const StorageEstimate& est, bool use_pruned) {
  Eigen::VectorXd th = est.theta;
  if (use_pruned)
    for (Eigen::Index k = 0; k < th.size(); ++k)
      if (!est.kept(k)) th(k) = 0.0;
  return th;
}

inline double eval_storage(const StorageEstimate& est, const Eigen::VectorXd& x,
                           bool use_pruned = false) {
  return effective_theta(est, use_pruned).dot(eval_features(est.dictionary, x));
}

inline Eigen::VectorXd storage_gradient(const StorageEstimate& est, const Eigen::VectorXd& x,
                                        bool use_pruned = false) {
  return eval_feature_gradients(est.dictionary, x).transpose() * effective_theta(est, use_pruned);
}

/// Copy whose discarded coefficients are zeroed, so that downstream analysis
/// evaluates the parsimonious function.
inline StorageEstimate pruned_storage(const StorageEstimate& est) {
  StorageEstimate out = est;
  out.theta = effective_theta(est, true);
  return out;
}

inline std::vector<std::string> kept_terms(const StorageEstimate& est) {
  std::vector<std::string> out;
  for (Eigen::Index k = 0; k < est.theta.size(); ++k)
    if (est.kept(k)) out.push_back(est.dictionary.features[static_cast<std::size_t>(k)].name());
  return out;
}

}  // namespace passivity_lab
