#include "surro/models/cv.hpp"

#include <algorithm>

namespace surro {

std::vector<std::vector<Eigen::Index>> kfold_indices(Eigen::Index n, int folds, const RandomSource& rng) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  RandomSource r = rng;
  r.shuffle(std::span<Eigen::Index>(perm));
  std::vector<std::vector<Eigen::Index>> out(static_cast<std::size_t>(folds));
  Eigen::Index at = 0;
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index size = n / folds + (f < n % folds ? 1 : 0);
    out[static_cast<std::size_t>(f)].assign(perm.begin() + at, perm.begin() + at + size);
    std::sort(out[static_cast<std::size_t>(f)].begin(), out[static_cast<std::size_t>(f)].end());
    at += size;
  }
  return out;
}

Matrix take_rows(const Matrix& m, const std::vector<Eigen::Index>& rows) { return m(rows, Eigen::all); }

Vector take_rows(const Vector& v, const std::vector<Eigen::Index>& rows) { return v(rows); }

std::vector<TreeParams> default_tree_grid() {
  std::vector<TreeParams> grid;
  for (int depth : {3, 4, -1}) {
    for (int leaf : {50, 100, 200}) {
      for (int split : {100, 200, 400}) {
        for (double alpha : {0.0, 1e-3}) {
          TreeParams p;
          p.max_depth = depth;
          p.min_samples_leaf = leaf;
          p.min_samples_split = split;
          p.ccp_alpha = alpha;
          grid.push_back(p);
        }
      }
    }
  }
  return grid;
}

}  // namespace surro
