#include <random>
#include <stdexcept>
#include <string>

#include "sheaf_fmtl/engine.hpp"

namespace sheaf_fmtl {

std::string_view to_string(InitKind kind) {
  switch (kind) {
    case InitKind::Gaussian: return "gaussian";
    case InitKind::Uniform: return "uniform";
    case InitKind::Orthogonal: return "orthogonal";
    case InitKind::IdentityPlusNoise: return "identity-plus-noise";
    case InitKind::Zero: return "zero";
  }
  return "unknown";
}

InitKind parse_init_kind(std::string_view name) {
  for (auto k : {InitKind::Gaussian, InitKind::Uniform, InitKind::Orthogonal, InitKind::IdentityPlusNoise,
                 InitKind::Zero})
    if (name == to_string(k)) return k;
  throw std::invalid_argument("unknown map initialisation '" + std::string(name) + "'");
}

void InitSpec::validate() const {
  if ((kind == InitKind::Gaussian || kind == InitKind::Uniform) && !(scale > 0.0))
    throw std::invalid_argument(std::string(to_string(kind)) + " initialisation needs a positive scale");
  if (kind == InitKind::IdentityPlusNoise && !(scale >= 0.0))
    throw std::invalid_argument("identity-plus-noise initialisation needs a non-negative noise scale");
}

RestrictionMaps init_maps(const InitSpec& spec, const SheafGraph& sheaf) {
  spec.validate();
  auto maps = RestrictionMaps::zeros(sheaf);
  if (spec.kind == InitKind::Zero) return maps;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(-spec.scale, spec.scale);
  const auto fill = [&](Matrix& m) {
    switch (spec.kind) {
      case InitKind::Gaussian:
        for (Eigen::Index r = 0; r < m.rows(); ++r)
          for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = spec.scale * normal(rng);
        break;
      case InitKind::Uniform:
        for (Eigen::Index r = 0; r < m.rows(); ++r)
          for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = uniform(rng);
        break;
      case InitKind::Orthogonal: {
        if (m.rows() > m.cols())
          throw std::invalid_argument("orthogonal initialisation needs d_ij <= d_i, got " + std::to_string(m.rows()) +
                                      " > " + std::to_string(m.cols()));
        Matrix g(m.cols(), m.rows());
        for (Eigen::Index r = 0; r < g.rows(); ++r)
          for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = normal(rng);
        Eigen::HouseholderQR<Matrix> qr(g);
        const Matrix q = qr.householderQ() * Matrix::Identity(m.cols(), m.rows());
        m = q.transpose();
        break;
      }
      case InitKind::IdentityPlusNoise:
        m.setIdentity();
        for (Eigen::Index r = 0; r < m.rows(); ++r)
          for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) += spec.scale * normal(rng);
        break;
      case InitKind::Zero:
        break;
    }
  };
  for (std::size_t e = 0; e < sheaf.n_edges(); ++e) {
    fill(maps.lower(e));
    fill(maps.upper(e));
  }
  return maps;
}

}  // namespace sheaf_fmtl
