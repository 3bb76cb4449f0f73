#pragma once

// Persistence of the pipeline stages in the artifact container format. Reads
// verify the stage tag and the configuration fingerprint and throw
// FingerprintMismatch on any disagreement.

#include "podnn/container.hpp"
#include "podnn/nn.hpp"
#include "podnn/pipeline.hpp"
#include "podnn/pod.hpp"

#include <string>

namespace podnn::io {

void write_samples(const std::string& path, const config::RunConfig& config, const std::string& fingerprint,
                   const pipeline::SampleSets& sets);
pipeline::SampleSets read_samples(const std::string& path, const std::string& expected_fingerprint);

void write_snapshots(const std::string& path, const config::RunConfig& config, const std::string& fingerprint,
                     const pipeline::SnapshotBundle& bundle);
pipeline::SnapshotBundle read_snapshots(const std::string& path, const std::string& expected_fingerprint,
                                        std::string* snapshot_hash = nullptr);

void write_basis(const std::string& path, const std::string& fingerprint, const pod::PodBasis& basis,
                 const std::string& snapshot_hash, bool mass_weighted);
pod::PodBasis read_basis(const std::string& path, const std::string& expected_fingerprint,
                         std::string* snapshot_hash = nullptr);

void write_model(const std::string& path, const std::string& fingerprint, const nn::MlpModel& model,
                 const nn::TrainReport& report);
nn::MlpModel read_model(const std::string& path, const std::string& expected_fingerprint);

}  // namespace podnn::io
