#include "iqbart/sampler.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <string>

#include "iqbart/error.hpp"
#include "iqbart/leaf_posterior.hpp"

namespace iqbart {

void AugmentationScheme::validate() const {
  if (r < 1) throw InputError("augmentation: r must be at least 1");
  if (kind == AugmentationKind::Single && r != 1) throw InputError("augmentation: Single implies r = 1");
}

void SamplerConfig::validate() const {
  prior.validate();
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw InputError("learning rate must be positive");
  if (burn_in < 0) throw InputError("burn_in must be nonnegative");
  if (draws < 1) throw InputError("draws must be at least 1");
  if (num_particles < 1) throw InputError("num_particles must be at least 1");
}

AugmentedDataset augment(const Matrix& x, std::span<const double> y, const AugmentationScheme& scheme, Rng& rng) {
  scheme.validate();
  const std::size_t n = y.size();
  if (n == 0) throw InputError("augment: empty data");
  if (x.rows != n) throw InputError("augment: x has " + std::to_string(x.rows) + " rows, y has " + std::to_string(n));
  const std::size_t d = x.cols;
  const auto r = static_cast<std::size_t>(scheme.r);

  AugmentedDataset out;
  out.dim = d;
  out.features = Matrix(n * r, d + 1);
  out.y.resize(n * r);
  out.origin.resize(n * r);
  for (std::size_t j = 0; j < r; ++j) {
    const double shared = scheme.kind == AugmentationKind::Simultaneous ? rng.uniform() : 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = j * n + i;
      std::copy_n(x.row(i).begin(), d, out.features.row(row).begin());
      out.features(row, d) = scheme.kind == AugmentationKind::Simultaneous ? shared : rng.uniform();
      out.y[row] = y[i];
      out.origin[row] = i;
    }
  }
  return out;
}

double log_gen_likelihood(const Forest& forest, const AugmentedDataset& data, double learning_rate) {
  std::vector<double> losses(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    losses[i] = check_loss(data.y[i] - forest.eval(data.row(i)), data.tau(i));
  return -learning_rate * num::pairwise_sum(losses);
}

namespace {

struct TreeNode {
  int feature = -1;
  std::uint32_t thr_rank = 0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct PNode {
  int feature = -1;
  std::uint32_t thr_rank = 0;
  int left = -1;
  int right = -1;
  int depth = 0;
  std::uint32_t begin = 0;  // segment of the arena holding sorted positions
  std::uint32_t count = 0;
  double ml = 0.0;
};

struct Particle {
  std::vector<PNode> nodes;
  std::size_t next = 0;
  double log_w = 0.0;
  bool done() const { return next >= nodes.size(); }
};

class Chain {
 public:
  Chain(const AugmentedDataset& data, const SamplerConfig& cfg);

  void sweep() {
    // Rebuild the running fit so rounding drift cannot accumulate across sweeps.
    std::fill(fit_.begin(), fit_.end(), 0.0);
    for (std::size_t k = 0; k < trees_.size(); ++k)
      for (std::size_t i = 0; i < n_; ++i) fit_[i] += trees_[k][leaf_of_[k][i]].value;
    for (std::size_t k = 0; k < trees_.size(); ++k) update_tree(k);
  }
  Forest forest() const;
  double log_likelihood() const;
  double leaf_scale() const { return leaf_.leaf_scale(); }

 private:
  void update_tree(std::size_t k);
  void sort_residuals(std::size_t k);
  void expand(std::size_t p, const std::vector<TreeNode>& reference);
  bool choose_split(const PNode& node, int& feature, std::uint32_t& thr);
  void split(Particle& part, std::size_t idx, int feature, std::uint32_t thr);
  double segment_marginal(std::uint32_t begin, std::uint32_t count);
  void resample();

  const AugmentedDataset& data_;
  SamplerConfig cfg_;
  std::size_t n_;
  std::size_t nf_;
  double offset_;
  Rng rng_;
  LeafPosterior leaf_;

  std::vector<std::vector<std::uint32_t>> ranks_;  // per feature, per row
  std::vector<std::vector<double>> values_;         // per feature, distinct sorted values
  std::vector<double> yc_;
  std::vector<double> tau_;

  std::vector<std::vector<TreeNode>> trees_;
  std::vector<std::vector<std::uint32_t>> leaf_of_;  // per tree, per row: node index
  std::vector<double> fit_;                          // sum over trees of leaf values
  std::size_t last_updated_ = 0;
  bool order_valid_ = false;

  // Per tree-update scratch, indexed by sorted position.
  std::vector<double> key_;  // per row
  std::vector<std::uint32_t> order_, order_tmp_, group_start_;
  std::vector<double> rs_;
  std::vector<double> ts_;
  std::vector<std::vector<std::uint32_t>> sorted_ranks_;
  std::vector<std::uint32_t> arena_;
  std::size_t arena_used_ = 0;
  std::vector<std::uint32_t> spill_;
  std::vector<double> rbuf_;
  std::vector<double> prefix_;
  std::vector<std::uint64_t> bits_;
  std::vector<Particle> particles_, spare_;
  std::vector<double> weights_;
  std::vector<int> feature_order_;
};

Chain::Chain(const AugmentedDataset& data, const SamplerConfig& cfg)
    : data_(data), cfg_(cfg), n_(data.size()), nf_(data.dim + 1), rng_(cfg.seed),
      leaf_(cfg.learning_rate, [&] {
        const auto [lo, hi] = std::minmax_element(data.y.begin(), data.y.end());
        return cfg.prior.leaf_scale > 0.0 ? cfg.prior.leaf_scale : default_leaf_scale(*hi - *lo, cfg.prior.num_trees);
      }()) {
  const auto [lo, hi] = std::minmax_element(data.y.begin(), data.y.end());
  offset_ = 0.5 * (*lo + *hi);
  yc_.resize(n_);
  tau_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    yc_[i] = data.y[i] - offset_;
    tau_[i] = data.tau(i);
  }

  ranks_.assign(nf_, std::vector<std::uint32_t>(n_));
  values_.resize(nf_);
  std::vector<std::pair<double, std::uint32_t>> col(n_);
  for (std::size_t f = 0; f < nf_; ++f) {
    for (std::size_t i = 0; i < n_; ++i) col[i] = {data.features(i, f), static_cast<std::uint32_t>(i)};
    std::sort(col.begin(), col.end());
    std::uint32_t rank = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (i > 0 && col[i].first != col[i - 1].first) ++rank;
      if (i == 0 || col[i].first != col[i - 1].first) values_[f].push_back(col[i].first);
      ranks_[f][col[i].second] = rank;
    }
  }

  const auto num_trees = static_cast<std::size_t>(cfg.prior.num_trees);
  trees_.assign(num_trees, std::vector<TreeNode>(1));
  leaf_of_.assign(num_trees, std::vector<std::uint32_t>(n_, 0));
  fit_.assign(n_, 0.0);

  key_.resize(n_);
  order_.resize(n_);
  order_tmp_.resize(n_);
  rs_.resize(n_);
  ts_.resize(n_);
  sorted_ranks_.assign(nf_, std::vector<std::uint32_t>(n_));
  rbuf_.resize(n_);
  prefix_.resize(n_ + 1);
  spill_.resize(n_);
  arena_.resize(8 * n_);
  particles_.resize(static_cast<std::size_t>(cfg.num_particles));
  spare_.resize(particles_.size());
  weights_.resize(particles_.size());
  feature_order_.resize(nf_);
}

double Chain::segment_marginal(std::uint32_t begin, std::uint32_t count) {
  double* r = rbuf_.data();
  double* prefix = prefix_.data();
  const std::uint32_t* seg = arena_.data() + begin;
  double st = 0.0, str = 0.0, acc = 0.0;
  prefix[0] = 0.0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t pos = seg[i];
    const double v = rs_[pos];
    const double t = ts_[pos];
    r[i] = v;
    acc += v;
    prefix[i + 1] = acc;
    st += t;
    str += t * v;
  }
  return leaf_.log_marginal({r, count}, {prefix, count + 1u}, st, str);
}

bool Chain::choose_split(const PNode& node, int& feature, std::uint32_t& thr) {
  // Visiting features in a uniformly random order and taking the first
  // splittable one is a uniform choice among splittable features.
  std::iota(feature_order_.begin(), feature_order_.end(), 0);
  for (std::size_t i = nf_; i > 1; --i) std::swap(feature_order_[i - 1], feature_order_[rng_.below(i)]);

  const std::uint32_t* seg = arena_.data() + node.begin;
  for (int f : feature_order_) {
    const std::uint32_t* rk = sorted_ranks_[f].data();
    std::uint32_t lo = rk[seg[0]], hi = lo;
    for (std::uint32_t i = 1; i < node.count; ++i) {
      const std::uint32_t v = rk[seg[i]];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (lo == hi) continue;
    feature = f;
    if (values_[f].size() == n_) {
      // No ties on this feature: every row carries a distinct value.
      for (;;) {
        const std::uint32_t v = rk[seg[rng_.below(node.count)]];
        if (v != hi) {
          thr = v;
          return true;
        }
      }
    }
    const std::size_t span = hi - lo + 1;
    bits_.assign((span + 63) / 64, 0);
    for (std::uint32_t i = 0; i < node.count; ++i) {
      const std::uint32_t b = rk[seg[i]] - lo;
      bits_[b >> 6] |= std::uint64_t{1} << (b & 63);
    }
    std::uint64_t distinct = 0;
    for (auto w : bits_) distinct += static_cast<std::uint64_t>(std::popcount(w));
    std::uint64_t j = rng_.below(distinct - 1);  // excludes the largest value
    for (std::size_t w = 0;; ++w) {
      const auto c = static_cast<std::uint64_t>(std::popcount(bits_[w]));
      if (j < c) {
        std::uint64_t word = bits_[w];
        for (std::uint64_t s = 0; s < j; ++s) word &= word - 1;
        thr = lo + static_cast<std::uint32_t>(w * 64 + static_cast<std::size_t>(std::countr_zero(word)));
        return true;
      }
      j -= c;
    }
  }
  return false;
}

void Chain::split(Particle& part, std::size_t idx, int feature, std::uint32_t thr) {
  const PNode parent = part.nodes[idx];
  const std::uint32_t* rk = sorted_ranks_[feature].data();
  // Left rows go straight to the arena, right rows to scratch; both keep
  // the residual order of the parent.
  if (arena_.size() < arena_used_ + parent.count) arena_.resize(2 * (arena_used_ + parent.count));
  std::uint32_t* out = arena_.data() + arena_used_;
  std::uint32_t* spill = spill_.data();
  const std::uint32_t* seg = arena_.data() + parent.begin;
  std::uint32_t nl = 0, nr = 0;
  for (std::uint32_t i = 0; i < parent.count; ++i) {
    const std::uint32_t pos = seg[i];
    const bool go_left = rk[pos] <= thr;
    out[nl] = pos;
    spill[nr] = pos;
    nl += go_left;
    nr += !go_left;
  }
  std::copy_n(spill, nr, out + nl);
  PNode left, right;
  left.depth = right.depth = parent.depth + 1;
  left.begin = static_cast<std::uint32_t>(arena_used_);
  left.count = nl;
  right.begin = left.begin + nl;
  right.count = nr;
  arena_used_ += parent.count;
  left.ml = segment_marginal(left.begin, left.count);
  right.ml = segment_marginal(right.begin, right.count);

  part.log_w += left.ml + right.ml - parent.ml;
  const int li = static_cast<int>(part.nodes.size());
  PNode& pn = part.nodes[idx];
  pn.feature = feature;
  pn.thr_rank = thr;
  pn.left = li;
  pn.right = li + 1;
  part.nodes.push_back(left);
  part.nodes.push_back(right);
}

void Chain::expand(std::size_t p, const std::vector<TreeNode>& reference) {
  Particle& part = particles_[p];
  const std::size_t idx = part.next++;
  if (p == 0) {
    const TreeNode& ref = reference[idx];
    if (ref.feature >= 0) split(part, idx, ref.feature, ref.thr_rank);
    return;
  }
  const PNode& node = part.nodes[idx];
  if (cfg_.max_depth >= 0 && node.depth >= cfg_.max_depth) return;
  if (!(rng_.uniform() < cfg_.prior.split_probability(node.depth))) return;
  int feature = -1;
  std::uint32_t thr = 0;
  if (node.count < 2 || !choose_split(node, feature, thr)) return;
  split(part, idx, feature, thr);
}

void Chain::resample() {
  const std::size_t np = particles_.size();
  double hi = num::kNegInf;
  for (const auto& p : particles_) hi = std::max(hi, p.log_w);
  double total = 0.0;
  for (std::size_t i = 0; i < np; ++i) total += weights_[i] = std::exp(particles_[i].log_w - hi);
  spare_[0] = particles_[0];
  for (std::size_t i = 1; i < np; ++i) {
    double u = rng_.uniform() * total;
    std::size_t a = 0;
    while (a + 1 < np && u >= weights_[a]) u -= weights_[a++];
    spare_[i] = particles_[a];
  }
  std::swap(particles_, spare_);
  for (auto& p : particles_) p.log_w = 0.0;
}

// Sorts rows by partial residual (key, row). Between consecutive updates the
// residual moves by a constant on each cell of (leaf in this tree, leaf in the
// tree updated last), so the previous order split by cell gives presorted
// runs; merging them and finishing with an insertion pass is near linear.
void Chain::sort_residuals(std::size_t k) {
  for (std::size_t i = 0; i < n_; ++i) key_[i] = yc_[i] - fit_[i] + trees_[k][leaf_of_[k][i]].value;
  const auto less = [&](std::uint32_t a, std::uint32_t b) { return key_[a] < key_[b] || (key_[a] == key_[b] && a < b); };

  const std::size_t cur = trees_[k].size(), prev = trees_[last_updated_].size();
  if (!order_valid_ || cur * prev > n_) {
    std::iota(order_.begin(), order_.end(), 0u);
    std::sort(order_.begin(), order_.end(), less);
    order_valid_ = true;
    return;
  }

  const auto& a = leaf_of_[k];
  const auto& b = leaf_of_[last_updated_];
  group_start_.assign(cur * prev + 1, 0);
  for (std::size_t i = 0; i < n_; ++i) ++group_start_[a[i] * prev + b[i] + 1];
  std::partial_sum(group_start_.begin(), group_start_.end(), group_start_.begin());
  for (std::uint32_t row : order_) order_tmp_[group_start_[a[row] * prev + b[row]]++] = row;
  // group_start_[g] now holds the end of group g.
  std::vector<std::uint32_t> ends;
  for (std::size_t g = 0; g + 1 < group_start_.size(); ++g)
    if (group_start_[g] > (ends.empty() ? 0u : ends.back())) ends.push_back(group_start_[g]);

  // Bottom-up pairwise merging of the runs.
  std::uint32_t* src = order_tmp_.data();
  std::uint32_t* dst = order_.data();
  while (ends.size() > 1) {
    std::vector<std::uint32_t> merged;
    std::uint32_t begin = 0;
    for (std::size_t r = 0; r < ends.size(); r += 2) {
      if (r + 1 < ends.size()) {
        std::merge(src + begin, src + ends[r], src + ends[r], src + ends[r + 1], dst + begin, less);
        merged.push_back(ends[r + 1]);
        begin = ends[r + 1];
      } else {
        std::copy(src + begin, src + ends[r], dst + begin);
        merged.push_back(ends[r]);
      }
    }
    ends.swap(merged);
    std::swap(src, dst);
  }
  if (src != order_.data()) std::copy_n(src, n_, order_.data());

  // Rounding in the running fit can leave a few local inversions.
  for (std::size_t i = 1; i < n_; ++i) {
    const std::uint32_t row = order_[i];
    std::size_t j = i;
    while (j > 0 && less(row, order_[j - 1])) {
      order_[j] = order_[j - 1];
      --j;
    }
    order_[j] = row;
  }
}

void Chain::update_tree(std::size_t k) {
  sort_residuals(k);
  for (std::size_t pos = 0; pos < n_; ++pos) {
    const std::uint32_t row = order_[pos];
    rs_[pos] = key_[row];
    ts_[pos] = tau_[row];
  }
  for (std::size_t f = 0; f < nf_; ++f) {
    const auto& src = ranks_[f];
    auto& dst = sorted_ranks_[f];
    for (std::size_t pos = 0; pos < n_; ++pos) dst[pos] = src[order_[pos]];
  }

  std::iota(arena_.begin(), arena_.begin() + static_cast<std::ptrdiff_t>(n_), 0u);
  arena_used_ = n_;
  PNode root;
  root.begin = 0;
  root.count = static_cast<std::uint32_t>(n_);
  root.ml = segment_marginal(0, root.count);
  for (auto& p : particles_) {
    p.nodes.assign(1, root);
    p.next = 0;
    p.log_w = 0.0;
  }

  const auto& reference = trees_[k];
  for (;;) {
    for (std::size_t p = 0; p < particles_.size(); ++p)
      if (!particles_[p].done()) expand(p, reference);
    const bool all_done = std::all_of(particles_.begin(), particles_.end(), [](const Particle& q) { return q.done(); });
    if (all_done) break;
    resample();
  }

  double hi = num::kNegInf;
  for (const auto& p : particles_) hi = std::max(hi, p.log_w);
  double total = 0.0;
  for (std::size_t i = 0; i < particles_.size(); ++i) total += weights_[i] = std::exp(particles_[i].log_w - hi);
  double u = rng_.uniform() * total;
  std::size_t chosen = 0;
  while (chosen + 1 < particles_.size() && u >= weights_[chosen]) u -= weights_[chosen++];

  const Particle& part = particles_[chosen];
  std::vector<TreeNode> tree(part.nodes.size());
  for (std::size_t i = 0; i < part.nodes.size(); ++i) {
    const PNode& pn = part.nodes[i];
    TreeNode& tn = tree[i];
    tn.feature = pn.feature;
    tn.thr_rank = pn.thr_rank;
    tn.left = pn.left;
    tn.right = pn.right;
    if (pn.feature >= 0) continue;
    segment_marginal(pn.begin, pn.count);
    tn.value = leaf_.sample(rng_);
    auto& leaf_of = leaf_of_[k];
    for (std::uint32_t j = 0; j < pn.count; ++j) {
      const std::uint32_t row = order_[arena_[pn.begin + j]];
      fit_[row] += tn.value - trees_[k][leaf_of[row]].value;
      leaf_of[row] = static_cast<std::uint32_t>(i);
    }
  }
  trees_[k] = std::move(tree);
  last_updated_ = k;
}

Forest Chain::forest() const {
  Forest out;
  out.offset = offset_;
  out.trees.reserve(trees_.size());
  for (const auto& tree : trees_) {
    std::vector<Node> nodes(tree.size());
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const TreeNode& tn = tree[i];
      Node& nd = nodes[i];
      nd.feature = tn.feature;
      nd.left = tn.left;
      nd.right = tn.right;
      nd.value = tn.value;
      if (tn.feature >= 0) nd.threshold = values_[tn.feature][tn.thr_rank];
    }
    out.trees.emplace_back(std::move(nodes));
  }
  return out;
}

double Chain::log_likelihood() const {
  std::vector<double> losses(n_);
  for (std::size_t i = 0; i < n_; ++i) losses[i] = check_loss(yc_[i] - fit_[i], tau_[i]);
  return -cfg_.learning_rate * num::pairwise_sum(losses);
}

}  // namespace

PosteriorDraws run_sampler(const AugmentedDataset& data, const SamplerConfig& cfg, const SweepCallback& progress) {
  cfg.validate();
  if (data.size() == 0) throw InputError("run_sampler: empty data");
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data.y[i])) throw NonFiniteError("run_sampler: non-finite response at row " + std::to_string(i));
    for (double v : data.row(i))
      if (!std::isfinite(v)) throw NonFiniteError("run_sampler: non-finite feature at row " + std::to_string(i));
  }

  Chain chain(data, cfg);
  PosteriorDraws out;
  out.config = cfg;
  out.leaf_scale = chain.leaf_scale();
  out.config.prior.leaf_scale = out.leaf_scale;
  out.feature_ranges.resize(data.dim + 1);
  for (std::size_t f = 0; f <= data.dim; ++f) {
    auto col = data.features.column(f);
    const auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    out.feature_ranges[f] = {*lo, *hi};
  }
  const int total = cfg.burn_in + cfg.draws;
  out.forests.reserve(static_cast<std::size_t>(cfg.draws));
  for (int s = 0; s < total; ++s) {
    chain.sweep();
    if (s >= cfg.burn_in) {
      out.forests.push_back(chain.forest());
      out.log_likelihood.push_back(chain.log_likelihood());
    }
    if (progress) progress(s + 1, total);
  }
  return out;
}

}  // namespace iqbart
