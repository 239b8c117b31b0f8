#pragma once

#include "pharl/encoder.hpp"
#include "pharl/labeling.hpp"
#include "pharl/loss.hpp"
#include "pharl/metrics.hpp"
#include "pharl/relations.hpp"

// Serial reference implementations of every OpenMP kernel. Straight-line
// loops with the same accumulation conventions as the parallel versions;
// tests assert bit-identical outputs, and the benchmark tool compares
// runtimes. Product code never calls these.
namespace pharl::ref {

std::vector<PhysicsLabel> label_windows(const Dataset& ds, const DatasetIndex& idx,
                                        const LabelingConfig& config);

std::vector<AnchorRelations> build_relations(std::span<const PoolEntry> pool,
                                             int num_anchors,
                                             const RelationOptions& options = {});

LossBreakdown composite_loss(std::span<const AnchorRelations> relations,
                             const Matrix& pool_z, const Matrix& pre_projection,
                             const LossConfig& config);

LossGradient loss_gradient(std::span<const AnchorRelations> relations,
                           const Matrix& pool_z, const Matrix& pre_projection,
                           const LossConfig& config);

ForwardResult forward(const EncoderParams& params, const Matrix& features);

ParamGrads backward(const EncoderParams& params, const Matrix& features,
                    const ForwardResult& fwd, const Matrix& d_embeddings,
                    const Matrix& d_pre_projection);

PcrResult pcr(const Matrix& embeddings, std::span<const PhysicsLabel> labels);

NeighborhoodResult neighborhood_consistency(const Matrix& embeddings,
                                            std::span<const PhysicsLabel> labels,
                                            std::span<const int> video_ids, int k,
                                            std::uint64_t seed);

}  // namespace pharl::ref
