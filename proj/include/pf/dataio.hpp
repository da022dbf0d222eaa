#pragma once
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pf/geometry.hpp"
#include "pf/params.hpp"

namespace pf {

enum class Split { Train, Test };

enum class ShapeKind { Sphere, Torus, Cube, Cylinder };
ShapeKind parse_shape_kind(const std::string& s);
const char* shape_kind_name(ShapeKind k);

struct Dataset {
    std::vector<PointCloud> samples;
    std::vector<Split> split;
    std::string descriptor; // generator, parameters, seed

    std::vector<int> indices(Split s) const;
};

// Uniform surface samples of one shape, unit scale, before jitter/rotation.
Tensor sample_shape_surface(ShapeKind kind, int n_points, Rng& rng);

// Per class: surface sampling, Gaussian jitter, one random rotation, then
// unit-cube normalization. Labels are positions in `kinds`; split is 80/20
// per class, seeded.
Dataset gen_classification_set(const std::vector<ShapeKind>& kinds, int per_class, int n_points,
                               double noise_sigma, std::uint64_t seed);

// One bent-tube sample with an ellipsoidal bulge, plus the bulge geometry
// for verification. Pre-normalization coordinates. Points inside the
// ellipsoid carry label 1, the rest label 0; both labels always present.
struct VesselSample {
    PointCloud cloud;
    std::array<double, 3> blob_center;
    std::array<double, 3> blob_axes;
    double size_ratio = 0.0;
};
VesselSample make_vessel_sample(int n_points, Rng& rng);

Dataset gen_segmentation_set(int count, int n_points, std::uint64_t seed);

enum class CloudFormat { Text, Binary };
CloudFormat parse_cloud_format(const std::string& s);

// TEXT: '#' comments, header "points N features F labels L", then N rows of
// "x y z [f...] [label]" at 17 significant digits. BINARY: magic MPT1,
// little-endian u32 N/F/L, N*(3+F) f64, then N*L i32. Binary round-trips
// exactly; text to 1e-12.
void write_cloud(const std::string& path, const PointCloud& cloud, CloudFormat format);
PointCloud read_cloud(const std::string& path, CloudFormat format);

// Dataset directory: one cloud file per sample plus manifest.csv rows of
// "file,split,class_label" (class labels ride in the manifest; cloud files
// carry only per-point labels).
void write_dataset(const std::string& dir, const Dataset& ds, CloudFormat format);
Dataset read_dataset(const std::string& dir);

// Checkpoint: magic MPTC, then named tensor records (u32 name length, name,
// u32 rank, u32 dims, f64 payload), then the config text used to build the
// model. Parameters first, then any auxiliary tensors.
void write_checkpoint(const std::string& path, const ParamStore& params,
                      const std::vector<std::pair<std::string, Tensor>>& aux,
                      const std::string& config_text);
struct Checkpoint {
    std::vector<std::pair<std::string, Tensor>> tensors;
    std::string config_text;
};
Checkpoint read_checkpoint(const std::string& path);

} // namespace pf
