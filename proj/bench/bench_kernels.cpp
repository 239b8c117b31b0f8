// Timing comparison of the OpenMP kernels against their serial reference
// implementations, with an equality check on every row. Sizes scale well past
// the training defaults so the parallel sections actually matter.
//
//   ./bench_kernels [--quick]

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "pharl/encoder.hpp"
#include "pharl/loss.hpp"
#include "pharl/matrix.hpp"
#include "pharl/metrics.hpp"
#include "pharl/reference.hpp"
#include "pharl/relations.hpp"
#include "pharl/rng.hpp"

using namespace pharl;

namespace {

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

Matrix random_unit_rows(Rng& rng, int rows, int cols) {
  Matrix m(rows, cols);
  for (int r = 0; r < rows; ++r) {
    double n = 0.0;
    for (int j = 0; j < cols; ++j) {
      m.at(r, j) = rng.normal();
      n += m.at(r, j) * m.at(r, j);
    }
    n = std::sqrt(n);
    for (int j = 0; j < cols; ++j) m.at(r, j) /= n;
  }
  return m;
}

std::vector<PoolEntry> random_pool(Rng& rng, int n, int num_traj) {
  std::vector<PoolEntry> pool(n);
  for (int i = 0; i < n; ++i) {
    pool[i].id = "w" + std::to_string(i);
    pool[i].traj = int(rng.uniform_int(num_traj));
    double u = rng.uniform();
    pool[i].label = u < 0.56   ? PhysicsLabel::Supported
                    : u < 0.90 ? PhysicsLabel::Trunk
                               : PhysicsLabel::Head;
  }
  return pool;
}

bool bits_equal(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(double)) == 0;
}

void print_row(const char* name, double serial_ms, double omp_ms, bool match) {
  std::printf("%-22s %10.2f ms %10.2f ms %8.2fx   %s\n", name, serial_ms, omp_ms,
              serial_ms / omp_ms, match ? "match" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  bool quick = argc > 1 && std::string(argv[1]) == "--quick";
  const int pool_n = quick ? 256 : 2048;
  const int anchors = quick ? 64 : 512;
  const int dim = 32;
  const int pcr_n = quick ? 400 : 3000;
  const int enc_rows = quick ? 512 : 8192;

  Rng rng(20240901);
  std::printf("%-22s %13s %13s %9s   %s\n", "kernel", "serial", "openmp", "speedup", "check");

  {
    auto pool = random_pool(rng, pool_n, pool_n / 8);
    Matrix z = random_unit_rows(rng, pool_n, dim);
    Matrix pre(anchors, dim);
    for (double& v : pre.data) v = rng.normal();
    auto rels = build_relations(pool, anchors);
    LossConfig cfg;

    auto t0 = std::chrono::steady_clock::now();
    auto rels_ref = ref::build_relations(pool, anchors);
    double t_ser = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto rels_omp = build_relations(pool, anchors);
    double t_omp = ms_since(t0);
    bool ok = true;
    for (int i = 0; i < anchors; ++i) {
      ok = ok && rels_ref[i].traj_positives == rels_omp[i].traj_positives &&
           rels_ref[i].mask == rels_omp[i].mask &&
           rels_ref[i].phys_positives == rels_omp[i].phys_positives &&
           rels_ref[i].cross_traj == rels_omp[i].cross_traj;
    }
    print_row("build_relations", t_ser, t_omp, ok);

    t0 = std::chrono::steady_clock::now();
    auto grad_ref = ref::loss_gradient(rels, z, pre, cfg);
    t_ser = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto grad_omp = loss_gradient(rels, z, pre, cfg);
    t_omp = ms_since(t0);
    ok = bits_equal(grad_ref.d_pool_z, grad_omp.d_pool_z) &&
         bits_equal(grad_ref.d_pre_projection, grad_omp.d_pre_projection) &&
         grad_ref.value.total == grad_omp.value.total;
    print_row("loss_gradient", t_ser, t_omp, ok);
  }

  {
    EncoderConfig ecfg{64, 128, dim};
    Rng init = Rng::substream(1, "encoder-init");
    EncoderParams params = EncoderParams::init(ecfg, init);
    Matrix feats(enc_rows, ecfg.feature_dim);
    for (double& v : feats.data) v = rng.normal();

    auto t0 = std::chrono::steady_clock::now();
    auto fwd_ref = ref::forward(params, feats);
    double t_ser = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto fwd_omp = forward(params, feats);
    double t_omp = ms_since(t0);
    bool ok = bits_equal(fwd_ref.embeddings, fwd_omp.embeddings);
    print_row("encoder_forward", t_ser, t_omp, ok);

    Matrix dz = random_unit_rows(rng, enc_rows, dim);
    Matrix du(enc_rows, dim);
    t0 = std::chrono::steady_clock::now();
    auto bwd_ref = ref::backward(params, feats, fwd_omp, dz, du);
    t_ser = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto bwd_omp = backward(params, feats, fwd_omp, dz, du);
    t_omp = ms_since(t0);
    ok = bits_equal(bwd_ref.w1, bwd_omp.w1) && bits_equal(bwd_ref.w2, bwd_omp.w2);
    print_row("encoder_backward", t_ser, t_omp, ok);
  }

  {
    Matrix z = random_unit_rows(rng, pcr_n, dim);
    std::vector<PhysicsLabel> labels(pcr_n);
    std::vector<int> videos(pcr_n);
    for (int i = 0; i < pcr_n; ++i) {
      double u = rng.uniform();
      labels[i] = u < 0.56 ? PhysicsLabel::Supported : u < 0.90 ? PhysicsLabel::Trunk : PhysicsLabel::Head;
      videos[i] = int(rng.uniform_int(pcr_n / 8));
    }

    auto t0 = std::chrono::steady_clock::now();
    auto pcr_ref = ref::pcr(z, labels);
    double t_ser = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto pcr_omp = pcr(z, labels);
    double t_omp = ms_since(t0);
    print_row("pcr", t_ser, t_omp, pcr_ref.value == pcr_omp.value);

    t0 = std::chrono::steady_clock::now();
    auto nb_ref = ref::neighborhood_consistency(z, labels, videos, 10, 7);
    t_ser = ms_since(t0);
    t0 = std::chrono::steady_clock::now();
    auto nb_omp = neighborhood_consistency(z, labels, videos, 10, 7);
    t_omp = ms_since(t0);
    print_row("neighborhood", t_ser, t_omp, nb_ref.diagonal == nb_omp.diagonal);
  }

  return 0;
}
