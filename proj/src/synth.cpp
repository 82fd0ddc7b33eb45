#include "gist/synth.hpp"

#include "gist/matrix_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

namespace gist {
namespace {

// Layout of the latent space: `shared` dims every model sees unchanged, then
// two blocks of `rotated` dims that each model mixes by its own angle.
struct Layout {
  int shared;
  int rotated;
  int latent() const { return shared + 2 * rotated; }
};

Layout layout_of(const SynthConfig& c) {
  const int shared = std::max(c.n_classes, c.feature_dim / 4);
  return {shared, c.feature_dim - shared};
}

double type_position(int t, int n_types) {
  auto g = [](double x) { return x + 0.3 * x * (x - 1.0); };  // uneven spacing avoids distance ties
  return n_types > 1 ? g(t) / g(n_types - 1) : 0.0;
}

constexpr double kColumnScale = 0.5;
constexpr double kFaultKick = 5.0;

double seed_offset(int s) { return 0.035 * s + 0.014 * s * (s - 1); }

double model_angle(const SynthConfig& c, int t, int s) {
  return c.type_basis_strength * 1.2 * (type_position(t, c.n_types) + c.seed_noise * seed_offset(s));
}

class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()() { return dist_(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  Eigen::MatrixXd matrix(Eigen::Index r, Eigen::Index c) {
    Eigen::MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = (*this)();
    }
    return m;
  }

 private:
  std::mt19937_64 rng_;
  std::normal_distribution<double> dist_;
};

struct SynthModel {
  int type;
  int seed;
  double angle;
  Eigen::MatrixXd mix;   // d x d, near identity
  Eigen::MatrixXd head;  // d x C
};

Eigen::MatrixXd pre_features(const Layout& l, double angle, const Eigen::MatrixXd& z) {
  Eigen::MatrixXd pre(z.rows(), l.shared + l.rotated);
  pre.leftCols(l.shared) = z.leftCols(l.shared);
  pre.rightCols(l.rotated) =
      std::cos(angle) * z.middleCols(l.shared, l.rotated) + std::sin(angle) * z.rightCols(l.rotated);
  return pre;
}

Eigen::MatrixXd as_f32(const Eigen::MatrixXd& m) { return m.cast<float>().cast<double>(); }

Labels row_argmax(const Eigen::MatrixXd& m) { return predictions_of(m); }

}  // namespace

void SynthConfig::validate() const {
  auto bad = [](const std::string& what) { throw Error(ErrorCode::InvalidArgument, "synth: " + what); };
  if (n_types < 2) bad("n_types must be >= 2");
  if (seeds_per_type < 2) bad("seeds_per_type must be >= 2");
  if (n_classes < 2) bad("n_classes must be >= 2");
  const Layout l = layout_of(*this);
  if (l.rotated < 1) bad("feature_dim too small for the number of classes");
  if (n_train <= l.latent()) bad("n_train must exceed the latent size " + std::to_string(l.latent()));
  if (n_test_per_set < 2) bad("n_test_per_set must be >= 2");
  if (!(type_basis_strength >= 0.0 && type_basis_strength <= 1.0)) bad("type_basis_strength must lie in [0,1]");
  if (!(seed_noise >= 0.0)) bad("seed_noise must be >= 0");
  if (!(fault_rate > 0.0 && fault_rate < 1.0)) bad("fault_rate must lie in (0,1)");
  if (fault_rate * n_test_per_set < 5.0) bad("fault_rate * n_test_per_set must give at least 5 faults");
}

std::string synth_model_id(int type, int seed) { return "t" + std::to_string(type) + "s" + std::to_string(seed); }
std::string synth_testset_id(int type, int seed) { return "T_" + synth_model_id(type, seed); }

PlantDescription plant_description(const SynthConfig& c) {
  PlantDescription p;
  for (int t = 0; t < c.n_types; ++t) p.types.push_back("type" + std::to_string(t));
  p.type_proximity.assign(static_cast<std::size_t>(c.n_types), std::vector<double>(static_cast<std::size_t>(c.n_types)));
  for (int a = 0; a < c.n_types; ++a) {
    for (int b = 0; b < c.n_types; ++b) {
      p.type_proximity[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] =
          c.type_basis_strength * 1.2 * std::abs(type_position(a, c.n_types) - type_position(b, c.n_types));
    }
  }
  for (int t = 0; t < c.n_types; ++t) {
    for (int s = 0; s < c.seeds_per_type; ++s) {
      p.model_ids.push_back(synth_model_id(t, s));
      p.model_angles.push_back(model_angle(c, t, s));
      p.fault_direction[synth_testset_id(t, s)] = t;
    }
  }
  return p;
}

nlohmann::json to_json(const PlantDescription& p) {
  nlohmann::json models = nlohmann::json::array();
  for (std::size_t i = 0; i < p.model_ids.size(); ++i) {
    models.push_back({{"id", p.model_ids[i]}, {"angle", p.model_angles[i]}});
  }
  return {{"types", p.types},
          {"type_proximity", p.type_proximity},
          {"models", models},
          {"fault_direction", p.fault_direction},
          {"planted_metric", p.planted_metric}};
}

Workspace build_benchmark(const SynthConfig& c) {
  c.validate();
  const Layout l = layout_of(c);
  const int d = c.feature_dim;
  const int C = c.n_classes;
  Gaussian g(c.rng_seed);

  // shared train latents, whitened so every model sees the same geometry
  Eigen::MatrixXd z = g.matrix(c.n_train, l.latent());
  z.rowwise() -= z.colwise().mean();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  z = qr.householderQ() * Eigen::MatrixXd::Identity(c.n_train, l.latent()) * std::sqrt(double(c.n_train));

  Eigen::VectorXd spread(l.rotated);
  for (int i = 0; i < l.rotated; ++i) spread(i) = g.uniform(0.5, 1.5);
  const Eigen::MatrixXd tmpl = 0.5 * g.matrix(c.n_test_per_set, l.latent());
  const int n_faults = static_cast<int>(std::lround(c.fault_rate * c.n_test_per_set));

  std::vector<SynthModel> models;
  for (int t = 0; t < c.n_types; ++t) {
    for (int s = 0; s < c.seeds_per_type; ++s) {
      SynthModel m{t, s, model_angle(c, t, s), {}, {}};
      // invertible but far from orthogonal: invisible to CCA, not to CKA / Procrustes
      m.mix = Eigen::MatrixXd::Identity(d, d) + c.seed_noise * 0.3 * g.matrix(d, d) / std::sqrt(double(d));
      for (int j = 0; j < d; ++j) m.mix.col(j) *= std::exp(c.seed_noise * kColumnScale * g());
      // class scores read the shared dims only, so a test set's shift does not
      // flip predictions; the perturbation makes heads differ between seeds
      Eigen::MatrixXd pick = Eigen::MatrixXd::Zero(d, C);
      pick.topRows(l.shared) = c.seed_noise * 0.1 * g.matrix(l.shared, C);
      pick.topRows(C) += Eigen::MatrixXd::Identity(C, C);
      m.head = m.mix.partialPivLu().solve(pick);
      models.push_back(std::move(m));
    }
  }

  // one generated test set per model, shifted along the rotated dims by its angle
  const double mid = c.type_basis_strength * 1.2 * 0.5;
  std::vector<Eigen::MatrixXd> test_latents;
  std::vector<Labels> test_labels;
  for (const auto& m : models) {
    Eigen::VectorXd shift = 2.0 * (m.angle - mid) * spread;
    for (int i = 0; i < l.rotated; ++i) shift(i) += 0.05 * c.seed_noise * g();
    Eigen::MatrixXd zz = tmpl;
    zz.middleCols(l.shared, l.rotated).rowwise() += shift.transpose();
    zz.rightCols(l.rotated).rowwise() += shift.transpose();
    // faulty rows also leave along one of a few discrete directions; the
    // window of directions slides with the type position
    const int n_dirs = std::min(2 * c.n_types, l.rotated);
    const double centre = (c.type_basis_strength > 0.0 ? m.angle / (c.type_basis_strength * 1.2) : 0.5) * (n_dirs - 1);
    for (int r = 0; r < n_faults; ++r) {
      const int j = std::clamp(static_cast<int>(std::lround(centre)) + r % 3 - 1, 0, n_dirs - 1);
      zz(r, l.shared + j) += kFaultKick;
      zz(r, l.shared + l.rotated + j) += kFaultKick;
    }
    const Eigen::MatrixXd scores = zz.leftCols(C);
    Labels y = row_argmax(scores);
    for (int r = 0; r < n_faults; ++r) {
      Eigen::Index lo = 0;
      scores.row(r).minCoeff(&lo);
      y[static_cast<std::size_t>(r)] = lo;
    }
    test_latents.push_back(std::move(zz));
    test_labels.push_back(std::move(y));
  }

  Workspace ws;
  ws.num_classes = C;
  const Labels train_labels = row_argmax(z.leftCols(C));
  for (std::size_t i = 0; i < models.size(); ++i) {
    const auto& m = models[i];
    ModelEntry e;
    e.id = synth_model_id(m.type, m.seed);
    e.model_type = "type" + std::to_string(m.type);
    e.seed = m.seed;
    e.role = ModelRole::Reference;
    const std::filesystem::path dir = std::filesystem::path("models") / e.id;
    e.train_features_path = dir / "train_features.gmx";
    e.train_logits_path = dir / "train_logits.gmx";
    e.train_labels_path = "train_labels.gmx";
    const Eigen::MatrixXd x = pre_features(l, m.angle, z) * m.mix;
    e.train_features = as_f32(x);
    e.train_logits = as_f32(2.0 * x * m.head);
    e.train_labels = train_labels;
    for (std::size_t j = 0; j < models.size(); ++j) {
      const auto ts = synth_testset_id(models[j].type, models[j].seed);
      EvalEntry ev;
      ev.features_path = dir / "eval" / (ts + ".features.gmx");
      ev.logits_path = dir / "eval" / (ts + ".logits.gmx");
      const Eigen::MatrixXd xe = pre_features(l, m.angle, test_latents[j]) * m.mix;
      ev.features = as_f32(xe);
      ev.logits = as_f32(2.0 * xe * m.head);
      e.eval.emplace(ts, std::move(ev));
    }
    ws.models.push_back(std::move(e));

    TestSetEntry t;
    t.id = synth_testset_id(m.type, m.seed);
    t.origin_model = synth_model_id(m.type, m.seed);
    t.labels_path = std::filesystem::path("testsets") / (t.id + ".labels.gmx");
    t.labels = test_labels[i];
    ws.testsets.push_back(std::move(t));
  }
  return ws;
}

Workspace generate_benchmark(const SynthConfig& config, const std::filesystem::path& out_dir) {
  const auto ws = build_benchmark(config);
  write_workspace(ws, out_dir);
  std::ofstream plant(out_dir / "plant.json", std::ios::trunc);
  if (!plant) throw Error(ErrorCode::IoError, "cannot write " + (out_dir / "plant.json").string());
  plant << to_json(plant_description(config)).dump(2) << '\n';
  plant.close();
  return load_workspace(out_dir);
}

}  // namespace gist
