#include "scrl/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "scrl/eigen_util.hpp"
#include "scrl/errors.hpp"
#include "scrl/rewards.hpp"

namespace scrl {

// --- MlpBlock -----------------------------------------------------------

MlpBlock MlpBlock::init(int in, int hidden, int out, std::uint64_t seed) {
  Prng rng(seed);
  MlpBlock b;
  b.w1.resize(hidden, in);
  const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
  for (int i = 0; i < hidden; ++i)
    for (int j = 0; j < in; ++j) b.w1(i, j) = rng.uniform(-s1, s1);
  b.b1 = Eigen::VectorXd::Zero(hidden);
  b.w2.resize(out, hidden);
  const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  for (int i = 0; i < out; ++i)
    for (int j = 0; j < hidden; ++j) b.w2(i, j) = rng.uniform(-s2, s2);
  b.b2 = Eigen::VectorXd::Zero(out);
  b.v_w1 = Eigen::MatrixXd::Zero(hidden, in);
  b.v_b1 = Eigen::VectorXd::Zero(hidden);
  b.v_w2 = Eigen::MatrixXd::Zero(out, hidden);
  b.v_b2 = Eigen::VectorXd::Zero(out);
  return b;
}

Eigen::MatrixXd MlpBlock::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.cols() != w1.cols())
    throw DimensionError("MlpBlock: input width " + std::to_string(x.cols()) +
                         " != " + std::to_string(w1.cols()));
  Eigen::MatrixXd a = x * w1.transpose();
  a.rowwise() += b1.transpose();
  Eigen::MatrixXd y = a.cwiseMax(0.0) * w2.transpose();
  y.rowwise() += b2.transpose();
  if (cache) {
    cache->x = x;
    cache->a = std::move(a);
  }
  return y;
}

MlpBlock::Grads MlpBlock::backward(const Cache& cache,
                                   const Eigen::MatrixXd& d_out) const {
  const Eigen::MatrixXd h = cache.a.cwiseMax(0.0);
  Grads g;
  g.w2 = d_out.transpose() * h;
  g.b2 = d_out.colwise().sum().transpose();
  Eigen::MatrixXd d_a = d_out * w2;
  d_a = d_a.cwiseProduct((cache.a.array() > 0.0).cast<double>().matrix());
  g.w1 = d_a.transpose() * cache.x;
  g.b1 = d_a.colwise().sum().transpose();
  return g;
}

void MlpBlock::sgd_step(const Grads& g, double lr, double momentum,
                        double weight_decay) {
  v_w1 = momentum * v_w1 + g.w1 + weight_decay * w1;
  v_b1 = momentum * v_b1 + g.b1;  // biases are not decayed
  v_w2 = momentum * v_w2 + g.w2 + weight_decay * w2;
  v_b2 = momentum * v_b2 + g.b2;
  w1 -= lr * v_w1;
  b1 -= lr * v_b1;
  w2 -= lr * v_w2;
  b2 -= lr * v_b2;
}

std::size_t MlpBlock::param_count() const {
  return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size());
}

double MlpBlock::get_param(std::size_t i) const {
  std::size_t n1 = static_cast<std::size_t>(w1.size());
  std::size_t n2 = n1 + static_cast<std::size_t>(b1.size());
  std::size_t n3 = n2 + static_cast<std::size_t>(w2.size());
  if (i < n1) return w1.data()[i];
  if (i < n2) return b1.data()[i - n1];
  if (i < n3) return w2.data()[i - n2];
  return b2.data()[i - n3];
}

void MlpBlock::set_param(std::size_t i, double v) {
  std::size_t n1 = static_cast<std::size_t>(w1.size());
  std::size_t n2 = n1 + static_cast<std::size_t>(b1.size());
  std::size_t n3 = n2 + static_cast<std::size_t>(w2.size());
  if (i < n1)
    w1.data()[i] = v;
  else if (i < n2)
    b1.data()[i - n1] = v;
  else if (i < n3)
    w2.data()[i - n2] = v;
  else
    b2.data()[i - n3] = v;
}

double MlpBlock::grad_entry(const Grads& g, std::size_t i) {
  std::size_t n1 = static_cast<std::size_t>(g.w1.size());
  std::size_t n2 = n1 + static_cast<std::size_t>(g.b1.size());
  std::size_t n3 = n2 + static_cast<std::size_t>(g.w2.size());
  if (i < n1) return g.w1.data()[i];
  if (i < n2) return g.b1.data()[i - n1];
  if (i < n3) return g.w2.data()[i - n2];
  return g.b2.data()[i - n3];
}

// --- losses --------------------------------------------------------------

namespace {

// Row norms with degenerate rows flagged (norm < 1e-12).
Eigen::VectorXd row_norms(const Eigen::MatrixXd& m) {
  return m.rowwise().norm();
}

}  // namespace

double infonce_loss(const Eigen::MatrixXd& img_embs,
                    const Eigen::MatrixXd& expr_embs, double tau) {
  return infonce_loss_grad(img_embs, expr_embs, tau).loss;
}

InfonceGrad infonce_loss_grad(const Eigen::MatrixXd& img_embs,
                              const Eigen::MatrixXd& expr_embs, double tau) {
  if (img_embs.rows() != expr_embs.rows() ||
      img_embs.cols() != expr_embs.cols())
    throw DimensionError("infonce: embedding shape mismatch");
  const Eigen::Index n = img_embs.rows();
  InfonceGrad out;
  out.d_img = Eigen::MatrixXd::Zero(img_embs.rows(), img_embs.cols());
  out.d_expr = Eigen::MatrixXd::Zero(expr_embs.rows(), expr_embs.cols());
  if (n == 0) return out;

  const Eigen::VectorXd nu = row_norms(img_embs);
  const Eigen::VectorXd nv = row_norms(expr_embs);
  Eigen::MatrixXd u_hat = img_embs;
  Eigen::MatrixXd v_hat = expr_embs;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (nu[i] < 1e-12)
      u_hat.row(i).setZero();
    else
      u_hat.row(i) /= nu[i];
    if (nv[i] < 1e-12)
      v_hat.row(i).setZero();
    else
      v_hat.row(i) /= nv[i];
  }

  const Eigen::MatrixXd s = u_hat * v_hat.transpose();
  const Eigen::MatrixXd z = s / tau;

  // Row-wise and column-wise softmax with max subtraction.
  Eigen::MatrixXd p_row(n, n), p_col(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double m = z.row(i).maxCoeff();
    const Eigen::ArrayXd e = (z.row(i).array() - m).exp();
    p_row.row(i) = (e / e.sum()).matrix();
  }
  for (Eigen::Index j = 0; j < n; ++j) {
    const double m = z.col(j).maxCoeff();
    const Eigen::ArrayXd e = (z.col(j).array() - m).exp();
    p_col.col(j) = (e / e.sum()).matrix();
  }

  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    loss -= 0.5 * std::log(std::max(p_row(i, i), 1e-300));
    loss -= 0.5 * std::log(std::max(p_col(i, i), 1e-300));
  }
  loss /= static_cast<double>(n);
  out.loss = loss;

  Eigen::MatrixXd d_z = p_row + p_col;
  for (Eigen::Index i = 0; i < n; ++i) d_z(i, i) -= 2.0;
  d_z *= 1.0 / (2.0 * static_cast<double>(n));
  const Eigen::MatrixXd d_s = d_z / tau;

  // Through the cosine normalization.
  const Eigen::VectorXd row_dot = d_s.cwiseProduct(s).rowwise().sum();
  const Eigen::VectorXd col_dot = d_s.cwiseProduct(s).colwise().sum();
  Eigen::MatrixXd d_u = d_s * v_hat;
  Eigen::MatrixXd d_v = d_s.transpose() * u_hat;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (nu[i] < 1e-12) {
      out.d_img.row(i).setZero();
    } else {
      out.d_img.row(i) = (d_u.row(i) - row_dot[i] * u_hat.row(i)) / nu[i];
    }
    if (nv[i] < 1e-12) {
      out.d_expr.row(i).setZero();
    } else {
      out.d_expr.row(i) = (d_v.row(i) - col_dot[i] * v_hat.row(i)) / nv[i];
    }
  }
  return out;
}

double pearson(std::span<const double> y, std::span<const double> y_hat) {
  if (y.size() != y_hat.size())
    throw DimensionError("pearson: length mismatch");
  const std::size_t g = y.size();
  if (g < 2) return 0.0;
  double my = 0.0, mh = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    my += y[i];
    mh += y_hat[i];
  }
  my /= static_cast<double>(g);
  mh /= static_cast<double>(g);
  double dot = 0.0, ny = 0.0, nh = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double a = y[i] - my, b = y_hat[i] - mh;
    dot += a * b;
    ny += a * a;
    nh += b * b;
  }
  ny = std::sqrt(ny);
  nh = std::sqrt(nh);
  if (ny < 1e-12 || nh < 1e-12) return 0.0;  // constant vector convention
  return std::clamp(dot / (ny * nh), -1.0, 1.0);
}

namespace {

double pearson_row(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat,
                   Eigen::Index i) {
  const Eigen::VectorXd a = y.row(i);
  const Eigen::VectorXd b = y_hat.row(i);
  return pearson(std::span<const double>(a.data(), a.size()),
                 std::span<const double>(b.data(), b.size()));
}

}  // namespace

double pcc_loss(const Eigen::MatrixXd& y, const Eigen::MatrixXd& y_hat) {
  if (y.rows() != y_hat.rows() || y.cols() != y_hat.cols())
    throw DimensionError("pcc_loss: shape mismatch");
  if (y.cols() < 2) throw DimensionError("pcc_loss: needs at least 2 genes");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.rows(); ++i)
    sum += 1.0 - pearson_row(y, y_hat, i);
  return sum / static_cast<double>(y.rows());
}

double distill_loss(const Eigen::VectorXd& y_hat, const Eigen::VectorXd& y_ret,
                    double mean_sim, const TrainConfig& cfg) {
  if (y_hat.size() != y_ret.size())
    throw DimensionError("distill_loss: width mismatch");
  const double gate = (mean_sim >= cfg.sim_threshold) ? mean_sim : 0.0;
  const double msd =
      (y_hat - y_ret).squaredNorm() / static_cast<double>(y_hat.size());
  return cfg.lambda_kd * gate * msd;
}

LossBreakdown total_loss(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat,
                         const Eigen::VectorXd& y_ret, double mean_sim,
                         const TrainConfig& cfg) {
  if (y.size() != y_hat.size())
    throw DimensionError("total_loss: width mismatch");
  LossBreakdown b;
  b.mse = (y - y_hat).squaredNorm() / static_cast<double>(y.size());
  const Eigen::MatrixXd ym = y.transpose();
  const Eigen::MatrixXd hm = y_hat.transpose();
  b.pcc = pcc_loss(ym, hm);
  b.distill = distill_loss(y_hat, y_ret, mean_sim, cfg);
  b.total = cfg.lambda_r * b.mse + cfg.lambda_p * b.pcc + b.distill;
  return b;
}

// --- retrieval -------------------------------------------------------------

Retrieved retrieve(const Eigen::VectorXd& query_emb, const MemoryBank& bank,
                   int k, int exclude_index) {
  if (bank.size() == 0) throw StateError("retrieve: empty memory bank");
  if (k < 1) throw ValueError("retrieve: K must be >= 1");
  if (query_emb.size() != bank.embeddings.cols())
    throw DimensionError("retrieve: query width mismatch");

  Eigen::VectorXd q = query_emb;
  const double n = q.norm();
  if (n < 1e-12)
    q.setZero();
  else
    q /= n;
  const Eigen::VectorXd sims = bank.embeddings * q;

  std::vector<int> order;
  order.reserve(bank.size());
  for (int i = 0; i < static_cast<int>(bank.size()); ++i)
    if (i != exclude_index) order.push_back(i);

  const int usable = static_cast<int>(order.size());
  int kk = k;
  if (kk > usable) {
    std::cerr << "[retrieve] K=" << k << " clipped to bank size " << usable
              << "\n";
    kk = usable;
  }
  std::partial_sort(order.begin(), order.begin() + kk, order.end(),
                    [&](int a, int b) {
                      if (sims[a] != sims[b]) return sims[a] > sims[b];
                      return a < b;
                    });
  Retrieved r;
  r.indices.assign(order.begin(), order.begin() + kk);
  r.sims.reserve(kk);
  for (int i = 0; i < kk; ++i) r.sims.push_back(sims[r.indices[i]]);
  return r;
}

std::vector<std::size_t> majority_type_filter(const Retrieved& r,
                                              const MemoryBank& bank, int t) {
  if (r.indices.empty())
    throw ValueError("majority_type_filter: empty retrieval set");
  if (t < 1) throw ValueError("majority_type_filter: T must be >= 1");

  std::map<int, int> counts;
  for (int idx : r.indices) counts[bank.cell_types[idx]] += 1;
  std::vector<std::pair<int, int>> ranked(counts.begin(), counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;  // count ties -> lower type id
  });
  std::set<int> kept_types;
  for (std::size_t i = 0; i < ranked.size() && i < static_cast<std::size_t>(t);
       ++i)
    kept_types.insert(ranked[i].first);

  std::vector<std::size_t> kept;
  for (std::size_t pos = 0; pos < r.indices.size(); ++pos)
    if (kept_types.contains(bank.cell_types[r.indices[pos]])) kept.push_back(pos);
  return kept;
}

Eigen::VectorXd soft_label(const Retrieved& r,
                           std::span<const std::size_t> filtered,
                           const MemoryBank& bank) {
  if (filtered.empty()) throw StateError("soft_label: empty filtered set");
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(bank.raw_expressions.cols());
  for (std::size_t pos : filtered)
    acc += bank.raw_expressions.row(r.indices[pos]).transpose();
  return acc / static_cast<double>(filtered.size());
}

// --- trainer -----------------------------------------------------------------

namespace {

// Gradient of the batch objective w.r.t. y_hat plus the averaged breakdown.
// Retrieval targets are constants here: no gradient flows into the bank.
struct BatchLoss {
  LossBreakdown mean;
  Eigen::MatrixXd d_yhat;
};

BatchLoss batch_loss_wrt_outputs(const Eigen::MatrixXd& y,
                                 const Eigen::MatrixXd& y_hat,
                                 const Eigen::MatrixXd& y_ret,
                                 std::span<const double> mean_sims,
                                 const TrainConfig& cfg) {
  const Eigen::Index n = y.rows();
  const Eigen::Index g = y.cols();
  BatchLoss out;
  out.d_yhat = Eigen::MatrixXd::Zero(n, g);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_g = 1.0 / static_cast<double>(g);

  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd yi = y.row(i);
    const Eigen::VectorXd hi = y_hat.row(i);
    const Eigen::VectorXd diff = hi - yi;

    const double mse_i = diff.squaredNorm() * inv_g;
    out.mean.mse += mse_i * inv_n;
    out.d_yhat.row(i) +=
        (cfg.lambda_r * 2.0 * inv_g * inv_n) * diff.transpose();

    // PCC term.
    const Eigen::VectorXd yc = yi.array() - yi.mean();
    const Eigen::VectorXd hc = hi.array() - hi.mean();
    const double ny = yc.norm(), nh = hc.norm();
    double pcc = 0.0;
    if (ny >= 1e-12 && nh >= 1e-12) {
      pcc = std::clamp(yc.dot(hc) / (ny * nh), -1.0, 1.0);
      const Eigen::VectorXd dpcc = yc / (ny * nh) - (pcc / (nh * nh)) * hc;
      out.d_yhat.row(i) -= (cfg.lambda_p * inv_n) * dpcc.transpose();
    }
    out.mean.pcc += (1.0 - pcc) * inv_n;

    // Distillation term, gated on retrieval confidence.
    const double gate =
        (mean_sims[i] >= cfg.sim_threshold) ? mean_sims[i] : 0.0;
    const Eigen::VectorXd rdiff = hi - y_ret.row(i).transpose();
    out.mean.distill +=
        cfg.lambda_kd * gate * rdiff.squaredNorm() * inv_g * inv_n;
    out.d_yhat.row(i) +=
        (cfg.lambda_kd * gate * 2.0 * inv_g * inv_n) * rdiff.transpose();
  }
  out.mean.total = cfg.lambda_r * out.mean.mse + cfg.lambda_p * out.mean.pcc +
                   out.mean.distill;
  return out;
}

}  // namespace

Trainer::Trainer(const Dataset& ds, std::span<const std::int64_t> pool,
                 const TrainConfig& cfg)
    : ds_(&ds),
      pool_(pool.begin(), pool.end()),
      cfg_(cfg),
      reg_(MlpBlock::init(static_cast<int>(ds.feature_dim()), cfg.hidden,
                          static_cast<int>(ds.gene_count()),
                          derive_seed({cfg.seed, 0x7261ull}))),
      img_head_(MlpBlock::init(static_cast<int>(ds.feature_dim()),
                               cfg.proj_hidden, cfg.proj_out,
                               derive_seed({cfg.seed, 0x7268ull}))),
      expr_head_(MlpBlock::init(static_cast<int>(ds.gene_count()),
                                cfg.proj_hidden, cfg.proj_out,
                                derive_seed({cfg.seed, 0x7865ull}))),
      rng_(derive_seed({cfg.seed, 0x7472ull})) {
  if (pool_.empty()) throw StateError("Trainer: empty training pool");
  for (std::int64_t id : pool_) {
    if (!ds.is_revealed(id))
      throw StateError("Trainer: pool spot " + std::to_string(id) +
                       " has not been revealed");
  }
  bank_.ids = pool_;
  bank_.raw_expressions.resize(static_cast<Eigen::Index>(pool_.size()),
                               static_cast<Eigen::Index>(ds.gene_count()));
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    const auto row = ds.revealed_expression(pool_[i]);
    for (std::size_t j = 0; j < row.size(); ++j)
      bank_.raw_expressions(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(j)) = row[j];
  }
  bank_.cell_types =
      assign_cell_types(spot_embeddings(ds, pool_), ds.reference());
  rebuild_bank();
}

void Trainer::extend_pool(std::span<const std::int64_t> ids) {
  if (ids.empty()) return;
  for (std::int64_t id : ids) {
    if (!ds_->is_revealed(id))
      throw StateError("Trainer: spot " + std::to_string(id) +
                       " has not been revealed");
  }
  const std::size_t old = pool_.size();
  pool_.insert(pool_.end(), ids.begin(), ids.end());
  bank_.ids = pool_;
  bank_.raw_expressions.conservativeResize(
      static_cast<Eigen::Index>(pool_.size()), Eigen::NoChange);
  for (std::size_t i = old; i < pool_.size(); ++i) {
    const auto row = ds_->revealed_expression(pool_[i]);
    for (std::size_t j = 0; j < row.size(); ++j)
      bank_.raw_expressions(static_cast<Eigen::Index>(i),
                            static_cast<Eigen::Index>(j)) = row[j];
  }
  const std::vector<std::int64_t> fresh(ids.begin(), ids.end());
  const std::vector<int> new_types =
      assign_cell_types(spot_embeddings(*ds_, fresh), ds_->reference());
  bank_.cell_types.insert(bank_.cell_types.end(), new_types.begin(),
                          new_types.end());
  rebuild_bank();
}

void Trainer::rebuild_bank() {
  bank_.embeddings = normalize_rows(expr_head_.forward(bank_.raw_expressions));
}

double Trainer::epoch_lr() const {
  const int total = std::max(1, cfg_.epochs);
  const int e = std::min(epochs_done_, total);
  const double c = std::cos(M_PI * static_cast<double>(e) /
                            static_cast<double>(total));
  return cfg_.lr_min + 0.5 * (cfg_.lr0 - cfg_.lr_min) * (1.0 + c);
}

void Trainer::run_epochs(int n) {
  const std::size_t m = pool_.size();
  std::vector<std::size_t> rows(m);
  for (std::size_t i = 0; i < m; ++i) rows[i] = ds_->row_of(pool_[i]);
  const Eigen::MatrixXd f_pool =
      rows_to_eigen(ds_->features(), std::span<const std::size_t>(rows));
  const Eigen::MatrixXd& y_pool = bank_.raw_expressions;

  for (int step = 0; step < n; ++step) {
    const double lr = epoch_lr();
    EpochLog log;
    log.epoch = epochs_done_;
    log.lr = lr;

    // (a) projection heads on the contrastive objective.
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng_.shuffle(order);
    double con_sum = 0.0;
    for (std::size_t start = 0; start < m;
         start += static_cast<std::size_t>(cfg_.batch)) {
      const std::size_t stop =
          std::min(m, start + static_cast<std::size_t>(cfg_.batch));
      const Eigen::Index nb = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd xi(nb, f_pool.cols()), xe(nb, y_pool.cols());
      for (Eigen::Index i = 0; i < nb; ++i) {
        xi.row(i) = f_pool.row(static_cast<Eigen::Index>(order[start + i]));
        xe.row(i) = y_pool.row(static_cast<Eigen::Index>(order[start + i]));
      }
      MlpBlock::Cache ci, ce;
      const Eigen::MatrixXd u = img_head_.forward(xi, &ci);
      const Eigen::MatrixXd v = expr_head_.forward(xe, &ce);
      const InfonceGrad g = infonce_loss_grad(u, v, cfg_.temperature);
      img_head_.sgd_step(img_head_.backward(ci, g.d_img), lr, cfg_.momentum,
                         cfg_.weight_decay);
      expr_head_.sgd_step(expr_head_.backward(ce, g.d_expr), lr, cfg_.momentum,
                          cfg_.weight_decay);
      con_sum += g.loss * static_cast<double>(nb);
    }
    log.con_loss = con_sum / static_cast<double>(m);

    // (b) the epoch's frozen bank.
    rebuild_bank();

    // (c) regression path with leave-one-out retrieval.
    std::vector<std::size_t> order2(m);
    std::iota(order2.begin(), order2.end(), std::size_t{0});
    rng_.shuffle(order2);
    double mse_sum = 0.0, pcc_sum = 0.0, distill_sum = 0.0, total_sum = 0.0;
    const int k_eff =
        std::min(cfg_.top_k, static_cast<int>(m) - 1);  // leave-one-out
    for (std::size_t start = 0; start < m;
         start += static_cast<std::size_t>(cfg_.batch)) {
      const std::size_t stop =
          std::min(m, start + static_cast<std::size_t>(cfg_.batch));
      const Eigen::Index nb = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd fb(nb, f_pool.cols()), yb(nb, y_pool.cols());
      for (Eigen::Index i = 0; i < nb; ++i) {
        fb.row(i) = f_pool.row(static_cast<Eigen::Index>(order2[start + i]));
        yb.row(i) = y_pool.row(static_cast<Eigen::Index>(order2[start + i]));
      }
      MlpBlock::Cache cr;
      const Eigen::MatrixXd y_hat = reg_.forward(fb, &cr);

      Eigen::MatrixXd y_ret = y_hat;  // identical rows contribute zero loss
      std::vector<double> mean_sims(static_cast<std::size_t>(nb), 0.0);
      if (cfg_.retrieval_enabled && k_eff >= 1) {
        const Eigen::MatrixXd queries = img_head_.forward(fb);
        for (Eigen::Index i = 0; i < nb; ++i) {
          const int self = static_cast<int>(order2[start + i]);
          const Retrieved r =
              retrieve(queries.row(i).transpose(), bank_, k_eff, self);
          const std::vector<std::size_t> kept =
              majority_type_filter(r, bank_, cfg_.top_types);
          y_ret.row(i) = soft_label(r, kept, bank_).transpose();
          double s = 0.0;
          for (std::size_t pos : kept) s += r.sims[pos];
          mean_sims[static_cast<std::size_t>(i)] =
              s / static_cast<double>(kept.size());
        }
      }

      const BatchLoss bl = regression_batch_loss(
          yb, y_hat, y_ret, std::span<const double>(mean_sims), cfg_);
      reg_.sgd_step(reg_.backward(cr, bl.d_yhat), lr, cfg_.momentum,
                    cfg_.weight_decay);
      const double w = static_cast<double>(nb);
      mse_sum += bl.mean.mse * w;
      pcc_sum += bl.mean.pcc * w;
      distill_sum += bl.mean.distill * w;
      total_sum += bl.mean.total * w;
    }
    log.mse = mse_sum / static_cast<double>(m);
    log.pcc = pcc_sum / static_cast<double>(m);
    log.distill = distill_sum / static_cast<double>(m);
    log.total = total_sum / static_cast<double>(m);
    if (!std::isfinite(log.total) || !std::isfinite(log.con_loss))
      throw NumericError("Trainer: non-finite loss at epoch " +
                         std::to_string(epochs_done_));
    logs_.push_back(log);
    ++epochs_done_;
  }
}

PredictorModel Trainer::finish() {
  rebuild_bank();
  PredictorModel model;
  model.reg = std::move(reg_);
  model.img_head = std::move(img_head_);
  model.expr_head = std::move(expr_head_);
  model.bank = std::move(bank_);
  model.cfg = cfg_;
  model.trained = true;
  return model;
}

PredictorModel train_predictor(const Dataset& ds,
                               std::span<const std::int64_t> pool,
                               const TrainConfig& cfg,
                               std::vector<EpochLog>* logs) {
  Trainer trainer(ds, pool, cfg);
  trainer.run_epochs(cfg.epochs);
  if (logs) *logs = trainer.logs();
  return trainer.finish();
}

// --- inference -----------------------------------------------------------

Eigen::VectorXd regress(const MlpBlock& reg, std::span<const float> feature) {
  Eigen::MatrixXd x(1, feature.size());
  for (std::size_t j = 0; j < feature.size(); ++j)
    x(0, static_cast<Eigen::Index>(j)) = static_cast<double>(feature[j]);
  return reg.forward(x).row(0).transpose();
}

Matrix predict(const PredictorModel& model, const Matrix& features) {
  if (!model.trained) throw StateError("predict: model has not been trained");
  const Eigen::MatrixXd y = model.reg.forward(to_eigen(features));
  return to_matrix(y);
}

Eigen::MatrixXd regress_with_dropout(const MlpBlock& reg,
                                     const Eigen::MatrixXd& features,
                                     double dropout_rate, Prng& rng) {
  if (dropout_rate < 0.0 || dropout_rate >= 1.0)
    throw ValueError("dropout rate must be in [0, 1)");
  if (dropout_rate == 0.0) return reg.forward(features);
  Eigen::MatrixXd x = features;
  const double scale = 1.0 / (1.0 - dropout_rate);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      x(i, j) = (rng.uniform01() < dropout_rate) ? 0.0 : x(i, j) * scale;
  return reg.forward(x);
}

// --- checkpoints -----------------------------------------------------------

namespace {

Matrix vec_to_matrix(const Eigen::VectorXd& v) {
  Matrix m(static_cast<std::size_t>(v.size()), 1);
  for (Eigen::Index i = 0; i < v.size(); ++i)
    m.at(static_cast<std::size_t>(i), 0) = static_cast<float>(v[i]);
  return m;
}

Eigen::VectorXd matrix_to_vec(const Matrix& m) {
  Eigen::VectorXd v(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i)
    v[static_cast<Eigen::Index>(i)] = static_cast<double>(m.at(i, 0));
  return v;
}

void save_block(const MlpBlock& b, const std::filesystem::path& dir,
                const std::string& prefix) {
  save_matrix(to_matrix(b.w1), dir / (prefix + "_w1.scrm"));
  save_matrix(vec_to_matrix(b.b1), dir / (prefix + "_b1.scrm"));
  save_matrix(to_matrix(b.w2), dir / (prefix + "_w2.scrm"));
  save_matrix(vec_to_matrix(b.b2), dir / (prefix + "_b2.scrm"));
}

MlpBlock load_block(const std::filesystem::path& dir,
                    const std::string& prefix) {
  const Matrix w1 = load_matrix(dir / (prefix + "_w1.scrm"));
  const Matrix b1 = load_matrix(dir / (prefix + "_b1.scrm"));
  const Matrix w2 = load_matrix(dir / (prefix + "_w2.scrm"));
  const Matrix b2 = load_matrix(dir / (prefix + "_b2.scrm"));
  MlpBlock b;
  b.w1 = to_eigen(w1);
  b.b1 = matrix_to_vec(b1);
  b.w2 = to_eigen(w2);
  b.b2 = matrix_to_vec(b2);
  b.v_w1 = Eigen::MatrixXd::Zero(b.w1.rows(), b.w1.cols());
  b.v_b1 = Eigen::VectorXd::Zero(b.b1.size());
  b.v_w2 = Eigen::MatrixXd::Zero(b.w2.rows(), b.w2.cols());
  b.v_b2 = Eigen::VectorXd::Zero(b.b2.size());
  return b;
}

nlohmann::json train_config_json(const TrainConfig& c) {
  return {{"lr0", c.lr0},
          {"lr_min", c.lr_min},
          {"momentum", c.momentum},
          {"weight_decay", c.weight_decay},
          {"batch", c.batch},
          {"epochs", c.epochs},
          {"lambda_r", c.lambda_r},
          {"lambda_p", c.lambda_p},
          {"lambda_kd", c.lambda_kd},
          {"top_k", c.top_k},
          {"top_types", c.top_types},
          {"sim_threshold", c.sim_threshold},
          {"temperature", c.temperature},
          {"hidden", c.hidden},
          {"proj_hidden", c.proj_hidden},
          {"proj_out", c.proj_out},
          {"seed", c.seed},
          {"retrieval_enabled", c.retrieval_enabled}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.lr0 = j.at("lr0");
  c.lr_min = j.at("lr_min");
  c.momentum = j.at("momentum");
  c.weight_decay = j.at("weight_decay");
  c.batch = j.at("batch");
  c.epochs = j.at("epochs");
  c.lambda_r = j.at("lambda_r");
  c.lambda_p = j.at("lambda_p");
  c.lambda_kd = j.at("lambda_kd");
  c.top_k = j.at("top_k");
  c.top_types = j.at("top_types");
  c.sim_threshold = j.at("sim_threshold");
  c.temperature = j.at("temperature");
  c.hidden = j.at("hidden");
  c.proj_hidden = j.at("proj_hidden");
  c.proj_out = j.at("proj_out");
  c.seed = j.at("seed");
  c.retrieval_enabled = j.at("retrieval_enabled");
  return c;
}

}  // namespace

void save_checkpoint(const PredictorModel& model,
                     const std::filesystem::path& dir,
                     const std::string& config_hash) {
  if (!model.trained)
    throw StateError("save_checkpoint: model has not been trained");
  std::filesystem::create_directories(dir);
  save_block(model.reg, dir, "reg");
  save_block(model.img_head, dir, "img_head");
  save_block(model.expr_head, dir, "expr_head");
  save_matrix(to_matrix(model.bank.embeddings), dir / "bank_embeddings.scrm");
  save_matrix(to_matrix(model.bank.raw_expressions),
              dir / "bank_expressions.scrm");

  nlohmann::json manifest;
  manifest["format"] = "scrl-checkpoint";
  manifest["version"] = 1;
  manifest["feature_dim"] = model.reg.in_dim();
  manifest["gene_count"] = model.reg.out_dim();
  manifest["bank_ids"] = model.bank.ids;
  manifest["bank_types"] = model.bank.cell_types;
  manifest["train_config"] = train_config_json(model.cfg);
  manifest["config_hash"] = config_hash;
  std::ofstream out(dir / "manifest.json");
  if (!out) throw IoError("save_checkpoint: cannot write manifest");
  out << manifest.dump(2) << "\n";
}

PredictorModel load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw IoError("load_checkpoint: missing manifest in " + dir.string());
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("load_checkpoint: bad manifest: " + std::string(e.what()));
  }
  if (manifest.value("format", "") != "scrl-checkpoint")
    throw FormatError("load_checkpoint: not a checkpoint manifest");

  PredictorModel model;
  model.reg = load_block(dir, "reg");
  model.img_head = load_block(dir, "img_head");
  model.expr_head = load_block(dir, "expr_head");
  model.bank.embeddings = to_eigen(load_matrix(dir / "bank_embeddings.scrm"));
  model.bank.raw_expressions =
      to_eigen(load_matrix(dir / "bank_expressions.scrm"));
  model.bank.ids = manifest.at("bank_ids").get<std::vector<std::int64_t>>();
  model.bank.cell_types = manifest.at("bank_types").get<std::vector<int>>();
  model.cfg = train_config_from_json(manifest.at("train_config"));
  model.trained = true;
  return model;
}

}  // namespace scrl
