#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "kmshrink/estimators.hpp"
#include "kmshrink/kernels.hpp"
#include "kmshrink/model_selection.hpp"
#include "kmshrink/operators.hpp"
#include "kmshrink/oracle.hpp"
#include "kmshrink/types.hpp"

namespace kmshrink {

using Json = nlohmann::json;

inline Json to_json(const Vector& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

inline Json to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

inline Vector vector_from_json(const Json& a) {
  Vector v(static_cast<Index>(a.size()));
  Index i = 0;
  for (const auto& x : a) v(i++) = x.get<double>();
  return v;
}

inline Matrix matrix_from_json(const Json& rows) {
  if (rows.empty()) throw std::invalid_argument("matrix json: empty");
  const Index n = static_cast<Index>(rows.size());
  const Index d = static_cast<Index>(rows.front().size());
  Matrix m(n, d);
  Index i = 0;
  for (const auto& row : rows) {
    if (static_cast<Index>(row.size()) != d)
      throw std::invalid_argument("matrix json: ragged rows");
    Index j = 0;
    for (const auto& x : row) m(i, j++) = x.get<double>();
    ++i;
  }
  return m;
}

inline Json to_json(const KernelSpec& spec) {
  Json j{{"family", family_name(spec.family)}};
  if (spec.family == KernelFamily::Rbf) j["bandwidth_sq"] = spec.bandwidth_sq;
  return j;
}

// Accepts {"family":"rbf","bandwidth_sq":1.5}; the "bandwidth":"median" form
// is handled at config level where the data is available.
inline KernelSpec kernel_from_json(const Json& j) {
  KernelSpec spec;
  spec.family = family_from_name(j.at("family").get<std::string>());
  if (spec.family == KernelFamily::Rbf)
    spec.bandwidth_sq = j.at("bandwidth_sq").get<double>();
  spec.validate();
  return spec;
}

inline Json to_json(const KernelMeanEstimate& est) {
  return Json{{"kernel", to_json(est.kernel)},
              {"points", to_json(est.points)},
              {"weights", to_json(est.weights)}};
}

inline KernelMeanEstimate estimate_from_json(const Json& j) {
  KernelMeanEstimate est;
  est.kernel = kernel_from_json(j.at("kernel"));
  est.points = matrix_from_json(j.at("points"));
  est.weights = vector_from_json(j.at("weights"));
  est.validate();
  return est;
}

inline Json to_json(const LoocvProfile& p) {
  return Json{{"method", method_name(p.method)},
              {"lambdas", p.lambdas},
              {"scores", p.scores},
              {"selected_lambda", p.selected_lambda},
              {"selected_score", p.selected_score},
              {"evaluations", p.evaluations}};
}

inline Json to_json(const GaussianMixture& mix) {
  Json covs = Json::array();
  for (const Matrix& c : mix.covariances) covs.push_back(to_json(c));
  return Json{{"weights", to_json(mix.weights)},
              {"means", to_json(mix.means)},
              {"covariances", covs},
              {"noise_var", mix.noise_var}};
}

inline GaussianMixture mixture_from_json(const Json& j) {
  std::vector<Matrix> covs;
  for (const auto& c : j.at("covariances")) covs.push_back(matrix_from_json(c));
  return make_mixture(vector_from_json(j.at("weights")),
                      matrix_from_json(j.at("means")), std::move(covs),
                      j.at("noise_var").get<double>());
}

inline Json to_json(const KpcaModel& model) {
  return Json{{"coefficients", to_json(model.coefficients)},
              {"eigenvalues", to_json(model.eigenvalues)},
              {"centering_beta", to_json(model.centering_beta)},
              {"train_points", to_json(model.train_points)},
              {"kernel", to_json(model.kernel)},
              {"ell", model.ell}};
}

}  // namespace kmshrink
