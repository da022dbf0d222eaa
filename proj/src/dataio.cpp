#include "pf/dataio.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace pf {

namespace {
constexpr double kPi = 3.14159265358979323846;
} // namespace

ShapeKind parse_shape_kind(const std::string& s) {
    if (s == "sphere") return ShapeKind::Sphere;
    if (s == "torus") return ShapeKind::Torus;
    if (s == "cube") return ShapeKind::Cube;
    if (s == "cylinder") return ShapeKind::Cylinder;
    throw ArgumentError("unknown shape kind '" + s + "'");
}

const char* shape_kind_name(ShapeKind k) {
    switch (k) {
        case ShapeKind::Sphere: return "sphere";
        case ShapeKind::Torus: return "torus";
        case ShapeKind::Cube: return "cube";
        case ShapeKind::Cylinder: return "cylinder";
    }
    return "?";
}

std::vector<int> Dataset::indices(Split s) const {
    std::vector<int> out;
    for (size_t i = 0; i < split.size(); ++i)
        if (split[i] == s) out.push_back(static_cast<int>(i));
    return out;
}

Tensor sample_shape_surface(ShapeKind kind, int n_points, Rng& rng) {
    Tensor pts({n_points, 3});
    switch (kind) {
        case ShapeKind::Sphere: {
            for (int i = 0; i < n_points; ++i) {
                const double z = rng.uniform(-1.0, 1.0);
                const double phi = rng.uniform(0.0, 2.0 * kPi);
                const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
                pts.at(i, 0) = r * std::cos(phi);
                pts.at(i, 1) = r * std::sin(phi);
                pts.at(i, 2) = z;
            }
            break;
        }
        case ShapeKind::Torus: {
            const double R = 1.0, r = 0.4;
            for (int i = 0; i < n_points; ++i) {
                double u, v;
                // rejection keeps the sampling uniform in surface area
                for (;;) {
                    u = rng.uniform(0.0, 2.0 * kPi);
                    v = rng.uniform(0.0, 2.0 * kPi);
                    const double accept = (1.0 + (r / R) * std::cos(v)) / (1.0 + r / R);
                    if (rng.uniform() < accept) break;
                }
                pts.at(i, 0) = (R + r * std::cos(v)) * std::cos(u);
                pts.at(i, 1) = (R + r * std::cos(v)) * std::sin(u);
                pts.at(i, 2) = r * std::sin(v);
            }
            break;
        }
        case ShapeKind::Cube: {
            for (int i = 0; i < n_points; ++i) {
                const int face = rng.uniform_int(6);
                const double a = rng.uniform(-1.0, 1.0);
                const double b = rng.uniform(-1.0, 1.0);
                const double s = (face & 1) ? 1.0 : -1.0;
                switch (face / 2) {
                    case 0: pts.at(i, 0) = s; pts.at(i, 1) = a; pts.at(i, 2) = b; break;
                    case 1: pts.at(i, 0) = a; pts.at(i, 1) = s; pts.at(i, 2) = b; break;
                    default: pts.at(i, 0) = a; pts.at(i, 1) = b; pts.at(i, 2) = s; break;
                }
            }
            break;
        }
        case ShapeKind::Cylinder: {
            const double r = 0.5, half_h = 1.0;
            const double side_area = 2.0 * kPi * r * (2.0 * half_h);
            const double cap_area = kPi * r * r;
            const double side_frac = side_area / (side_area + 2.0 * cap_area);
            for (int i = 0; i < n_points; ++i) {
                if (rng.uniform() < side_frac) {
                    const double theta = rng.uniform(0.0, 2.0 * kPi);
                    pts.at(i, 0) = r * std::cos(theta);
                    pts.at(i, 1) = r * std::sin(theta);
                    pts.at(i, 2) = rng.uniform(-half_h, half_h);
                } else {
                    const double z = rng.uniform() < 0.5 ? -half_h : half_h;
                    const double rr = r * std::sqrt(rng.uniform());
                    const double theta = rng.uniform(0.0, 2.0 * kPi);
                    pts.at(i, 0) = rr * std::cos(theta);
                    pts.at(i, 1) = rr * std::sin(theta);
                    pts.at(i, 2) = z;
                }
            }
            break;
        }
    }
    return pts;
}

namespace {

// Uniform random rotation from three uniforms (unit quaternion).
void random_rotation(Rng& rng, double rot[9]) {
    const double u1 = rng.uniform();
    const double u2 = rng.uniform();
    const double u3 = rng.uniform();
    const double qx = std::sqrt(1.0 - u1) * std::sin(2.0 * kPi * u2);
    const double qy = std::sqrt(1.0 - u1) * std::cos(2.0 * kPi * u2);
    const double qz = std::sqrt(u1) * std::sin(2.0 * kPi * u3);
    const double qw = std::sqrt(u1) * std::cos(2.0 * kPi * u3);
    rot[0] = 1 - 2 * (qy * qy + qz * qz);
    rot[1] = 2 * (qx * qy - qz * qw);
    rot[2] = 2 * (qx * qz + qy * qw);
    rot[3] = 2 * (qx * qy + qz * qw);
    rot[4] = 1 - 2 * (qx * qx + qz * qz);
    rot[5] = 2 * (qy * qz - qx * qw);
    rot[6] = 2 * (qx * qz - qy * qw);
    rot[7] = 2 * (qy * qz + qx * qw);
    rot[8] = 1 - 2 * (qx * qx + qy * qy);
}

void apply_rotation(Tensor& pts, const double rot[9]) {
    for (int i = 0; i < pts.dim(0); ++i) {
        const double x = pts.at(i, 0), y = pts.at(i, 1), z = pts.at(i, 2);
        pts.at(i, 0) = rot[0] * x + rot[1] * y + rot[2] * z;
        pts.at(i, 1) = rot[3] * x + rot[4] * y + rot[5] * z;
        pts.at(i, 2) = rot[6] * x + rot[7] * y + rot[8] * z;
    }
}

} // namespace

Dataset gen_classification_set(const std::vector<ShapeKind>& kinds, int per_class, int n_points,
                               double noise_sigma, std::uint64_t seed) {
    if (kinds.empty()) throw ArgumentError("gen_classification_set: no shape kinds given");
    if (per_class < 2) throw ArgumentError("gen_classification_set: per_class must be >= 2");
    if (n_points < 16) throw ArgumentError("gen_classification_set: n_points must be >= 16");

    Rng rng(seed);
    Dataset ds;
    for (size_t k = 0; k < kinds.size(); ++k) {
        for (int s = 0; s < per_class; ++s) {
            Tensor pts = sample_shape_surface(kinds[k], n_points, rng);
            for (std::int64_t i = 0; i < pts.numel(); ++i)
                pts[i] += rng.gaussian(0.0, noise_sigma);
            double rot[9];
            random_rotation(rng, rot);
            apply_rotation(pts, rot);
            PointCloud cloud;
            cloud.positions = std::move(pts);
            cloud.class_label = static_cast<int>(k);
            ds.samples.push_back(normalize_unit_cube(cloud));
        }
    }

    // 80/20 split, seeded, balanced per class
    ds.split.assign(ds.samples.size(), Split::Train);
    for (size_t k = 0; k < kinds.size(); ++k) {
        std::vector<int> idx;
        for (int s = 0; s < per_class; ++s) idx.push_back(static_cast<int>(k) * per_class + s);
        rng.shuffle(idx);
        const int n_test = per_class - (per_class * 4) / 5;
        for (int t = 0; t < n_test; ++t) ds.split[static_cast<size_t>(idx[static_cast<size_t>(t)])] = Split::Test;
    }

    std::ostringstream desc;
    desc << "classification kinds=";
    for (size_t k = 0; k < kinds.size(); ++k) desc << (k ? "," : "") << shape_kind_name(kinds[k]);
    desc << " per_class=" << per_class << " n_points=" << n_points << " noise=" << noise_sigma
         << " seed=" << seed;
    ds.descriptor = desc.str();
    return ds;
}

VesselSample make_vessel_sample(int n_points, Rng& rng) {
    if (n_points < 16) throw ArgumentError("make_vessel_sample: n_points must be >= 16");
    VesselSample out;

    // bent centerline: quadratic Bezier from (-1,0,0) to (1,0,0)
    const double bend_y = rng.uniform(0.3, 0.9);
    const double bend_z = rng.uniform(-0.4, 0.4);
    const double radius = rng.uniform(0.08, 0.15);
    auto curve = [&](double t, double p[3]) {
        const double a = (1 - t) * (1 - t), b = 2 * t * (1 - t), c = t * t;
        p[0] = -a + c;
        p[1] = b * bend_y;
        p[2] = b * bend_z;
    };
    auto tangent = [&](double t, double d[3]) {
        d[0] = 2 * (1 - t) + 2 * t;
        d[1] = (2 - 4 * t) * bend_y;
        d[2] = (2 - 4 * t) * bend_z;
        const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
        for (int a = 0; a < 3; ++a) d[a] /= n;
    };

    const double t0 = rng.uniform(0.25, 0.75);
    out.size_ratio = rng.uniform(0.2, 0.6);
    const double blob_r = 0.5 * out.size_ratio;
    {
        double c[3], tan[3];
        curve(t0, c);
        tangent(t0, tan);
        // outward direction orthogonal to the tangent
        double up[3] = {0, 0, 1};
        double nrm[3] = {tan[1] * up[2] - tan[2] * up[1], tan[2] * up[0] - tan[0] * up[2],
                         tan[0] * up[1] - tan[1] * up[0]};
        double nn = std::sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]);
        if (nn < 1e-9) {
            nrm[0] = 0;
            nrm[1] = 1;
            nrm[2] = 0;
            nn = 1;
        }
        for (int a = 0; a < 3; ++a) nrm[a] /= nn;
        const double side = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (int a = 0; a < 3; ++a)
            out.blob_center[static_cast<size_t>(a)] = c[a] + side * nrm[a] * (radius + 0.6 * blob_r);
    }
    out.blob_axes = {blob_r, blob_r * rng.uniform(0.7, 1.0), blob_r * rng.uniform(0.7, 1.0)};

    const double blob_frac = 0.10 + 0.6 * (out.size_ratio - 0.2);
    int n_blob = std::max(1, std::min(n_points - 1, static_cast<int>(std::lround(blob_frac * n_points))));
    const int n_tube = n_points - n_blob;

    PointCloud cloud;
    cloud.positions = Tensor({n_points, 3});
    cloud.labels.assign(static_cast<size_t>(n_points), 0);

    for (int i = 0; i < n_tube; ++i) {
        const double t = rng.uniform();
        const double theta = rng.uniform(0.0, 2.0 * kPi);
        double c[3], tan[3];
        curve(t, c);
        tangent(t, tan);
        double up[3] = {0, 0, 1};
        double nrm[3] = {tan[1] * up[2] - tan[2] * up[1], tan[2] * up[0] - tan[0] * up[2],
                         tan[0] * up[1] - tan[1] * up[0]};
        double nn = std::sqrt(nrm[0] * nrm[0] + nrm[1] * nrm[1] + nrm[2] * nrm[2]);
        if (nn < 1e-9) {
            nrm[0] = 0;
            nrm[1] = 1;
            nrm[2] = 0;
            nn = 1;
        }
        for (int a = 0; a < 3; ++a) nrm[a] /= nn;
        double bin[3] = {tan[1] * nrm[2] - tan[2] * nrm[1], tan[2] * nrm[0] - tan[0] * nrm[2],
                         tan[0] * nrm[1] - tan[1] * nrm[0]};
        for (int a = 0; a < 3; ++a)
            cloud.positions.at(i, a) =
                c[a] + radius * (std::cos(theta) * nrm[a] + std::sin(theta) * bin[a]);
    }
    for (int i = n_tube; i < n_points; ++i) {
        // direction on the unit sphere scaled by the semi-axes
        const double z = rng.uniform(-1.0, 1.0);
        const double phi = rng.uniform(0.0, 2.0 * kPi);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double dir[3] = {r * std::cos(phi), r * std::sin(phi), z};
        for (int a = 0; a < 3; ++a)
            cloud.positions.at(i, a) = out.blob_center[static_cast<size_t>(a)] +
                                       dir[a] * out.blob_axes[static_cast<size_t>(a)];
        cloud.labels[static_cast<size_t>(i)] = 1;
    }

    // boundary convention: tube points falling inside the bulge join label 1
    for (int i = 0; i < n_tube; ++i) {
        double s = 0.0;
        for (int a = 0; a < 3; ++a) {
            const double d = (cloud.positions.at(i, a) - out.blob_center[static_cast<size_t>(a)]) /
                             out.blob_axes[static_cast<size_t>(a)];
            s += d * d;
        }
        if (s <= 1.0) cloud.labels[static_cast<size_t>(i)] = 1;
    }

    out.cloud = std::move(cloud);
    return out;
}

Dataset gen_segmentation_set(int count, int n_points, std::uint64_t seed) {
    if (count < 2) throw ArgumentError("gen_segmentation_set: count must be >= 2");
    Rng rng(seed);
    Dataset ds;
    for (int i = 0; i < count; ++i) {
        Rng sample_rng(rng.fork());
        VesselSample vs = make_vessel_sample(n_points, sample_rng);
        ds.samples.push_back(normalize_unit_cube(vs.cloud));
    }
    ds.split.assign(ds.samples.size(), Split::Train);
    std::vector<int> idx(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) idx[static_cast<size_t>(i)] = i;
    rng.shuffle(idx);
    const int n_test = count - (count * 4) / 5;
    for (int t = 0; t < n_test; ++t) ds.split[static_cast<size_t>(idx[static_cast<size_t>(t)])] = Split::Test;

    std::ostringstream desc;
    desc << "segmentation count=" << count << " n_points=" << n_points << " seed=" << seed;
    ds.descriptor = desc.str();
    return ds;
}

// -- file formats ---------------------------------------------------------

CloudFormat parse_cloud_format(const std::string& s) {
    if (s == "text") return CloudFormat::Text;
    if (s == "binary") return CloudFormat::Binary;
    throw ArgumentError("unknown cloud format '" + s + "' (expected text|binary)");
}

namespace {

void store_u32(std::string& buf, std::uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    buf.append(b, 4);
}

void store_i32(std::string& buf, std::int32_t v) { store_u32(buf, static_cast<std::uint32_t>(v)); }

void store_f64(std::string& buf, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
    buf.append(b, 8);
}

struct ByteReader {
    const std::string& data;
    size_t pos = 0;
    const std::string& path;

    void need(size_t n) {
        if (pos + n > data.size())
            throw ParseError(path + ": truncated file (needed " + std::to_string(n) +
                             " bytes at offset " + std::to_string(pos) + ")");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(data[pos + static_cast<size_t>(i)]);
        pos += 4;
        return v;
    }
    std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
    double f64() {
        need(8);
        std::uint64_t bits = 0;
        for (int i = 7; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(data[pos + static_cast<size_t>(i)]);
        pos += 8;
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    std::string bytes(size_t n) {
        need(n);
        std::string s = data.substr(pos, n);
        pos += n;
        return s;
    }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
}

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void write_cloud(const std::string& path, const PointCloud& cloud, CloudFormat format) {
    cloud.validate();
    const int n = cloud.size();
    const int f = cloud.features.empty() ? 0 : cloud.features.dim(1);
    const int l = cloud.labels.empty() ? 0 : 1;

    if (format == CloudFormat::Text) {
        std::ostringstream out;
        out << "points " << n << " features " << f << " labels " << l << "\n";
        for (int i = 0; i < n; ++i) {
            out << fmt_double(cloud.positions.at(i, 0)) << ' ' << fmt_double(cloud.positions.at(i, 1))
                << ' ' << fmt_double(cloud.positions.at(i, 2));
            for (int c = 0; c < f; ++c) out << ' ' << fmt_double(cloud.features.at(i, c));
            if (l) out << ' ' << cloud.labels[static_cast<size_t>(i)];
            out << "\n";
        }
        spit(path, out.str());
    } else {
        std::string out;
        out += "MPT1";
        store_u32(out, static_cast<std::uint32_t>(n));
        store_u32(out, static_cast<std::uint32_t>(f));
        store_u32(out, static_cast<std::uint32_t>(l));
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < 3; ++a) store_f64(out, cloud.positions.at(i, a));
            for (int c = 0; c < f; ++c) store_f64(out, cloud.features.at(i, c));
        }
        for (int i = 0; i < n * l; ++i) store_i32(out, cloud.labels[static_cast<size_t>(i)]);
        spit(path, out);
    }
}

PointCloud read_cloud(const std::string& path, CloudFormat format) {
    const std::string raw = slurp(path);
    PointCloud cloud;

    if (format == CloudFormat::Binary) {
        ByteReader r{raw, 0, path};
        if (r.bytes(4) != "MPT1") throw ParseError(path + ": bad magic, not a binary cloud file");
        const int n = static_cast<int>(r.u32());
        const int f = static_cast<int>(r.u32());
        const int l = static_cast<int>(r.u32());
        if (n < 1) throw ParseError(path + ": empty cloud");
        cloud.positions = Tensor({n, 3});
        if (f > 0) cloud.features = Tensor({n, f});
        for (int i = 0; i < n; ++i) {
            for (int a = 0; a < 3; ++a) cloud.positions.at(i, a) = r.f64();
            for (int c = 0; c < f; ++c) cloud.features.at(i, c) = r.f64();
        }
        if (l > 0) {
            cloud.labels.resize(static_cast<size_t>(n) * static_cast<size_t>(l));
            for (int i = 0; i < n * l; ++i) cloud.labels[static_cast<size_t>(i)] = r.i32();
        }
        return cloud;
    }

    std::istringstream in(raw);
    std::string line;
    int line_no = 0;
    int n = -1, f = 0, l = 0;
    int row = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string first;
        if (!(ls >> first)) continue; // blank or comment

        if (n < 0) {
            std::string kw2, kw3;
            int nv, fv, lv;
            if (first != "points" || !(ls >> nv >> kw2 >> fv >> kw3 >> lv) || kw2 != "features" ||
                kw3 != "labels" || nv < 1 || fv < 0 || lv < 0 || lv > 1)
                throw ParseError(path + ":" + std::to_string(line_no) + ": malformed header");
            std::string extra;
            if (ls >> extra)
                throw ParseError(path + ":" + std::to_string(line_no) + ": trailing token '" + extra + "'");
            n = nv;
            f = fv;
            l = lv;
            cloud.positions = Tensor({n, 3});
            if (f > 0) cloud.features = Tensor({n, f});
            if (l > 0) cloud.labels.assign(static_cast<size_t>(n), 0);
            continue;
        }

        if (row >= n)
            throw ParseError(path + ":" + std::to_string(line_no) + ": more than " +
                             std::to_string(n) + " data rows");
        std::istringstream rs(line);
        std::vector<double> vals;
        double v;
        while (rs >> v) vals.push_back(v);
        if (!rs.eof()) {
            std::string tok;
            std::istringstream bad(line);
            for (size_t skip = 0; skip <= vals.size(); ++skip) bad >> tok;
            throw ParseError(path + ":" + std::to_string(line_no) + ": bad token '" + tok + "'");
        }
        const size_t want = 3 + static_cast<size_t>(f) + static_cast<size_t>(l);
        if (vals.size() != want)
            throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(want) + " columns, got " + std::to_string(vals.size()));
        for (int a = 0; a < 3; ++a) cloud.positions.at(row, a) = vals[static_cast<size_t>(a)];
        for (int c = 0; c < f; ++c) cloud.features.at(row, c) = vals[3 + static_cast<size_t>(c)];
        if (l) {
            const double lv = vals[want - 1];
            if (lv != std::floor(lv))
                throw ParseError(path + ":" + std::to_string(line_no) + ": non-integer label");
            cloud.labels[static_cast<size_t>(row)] = static_cast<int>(lv);
        }
        ++row;
    }
    if (n < 0) throw ParseError(path + ": empty file, missing header");
    if (row != n)
        throw ParseError(path + ": expected " + std::to_string(n) + " rows, got " + std::to_string(row));
    return cloud;
}

void write_dataset(const std::string& dir, const Dataset& ds, CloudFormat format) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir + "': " + ec.message());

    std::ostringstream manifest;
    manifest << "file,split,class_label\n";
    const char* ext = format == CloudFormat::Text ? ".txt" : ".cloud";
    for (size_t i = 0; i < ds.samples.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof(name), "sample_%04zu%s", i, ext);
        write_cloud(dir + "/" + name, ds.samples[i], format);
        manifest << name << ',' << (ds.split[i] == Split::Train ? "train" : "test") << ',';
        if (ds.samples[i].class_label >= 0) manifest << ds.samples[i].class_label;
        manifest << '\n';
    }
    spit(dir + "/manifest.csv", manifest.str());
    spit(dir + "/descriptor.txt", ds.descriptor + "\n");
}

Dataset read_dataset(const std::string& dir) {
    const std::string manifest = slurp(dir + "/manifest.csv");
    std::istringstream in(manifest);
    std::string line;
    int line_no = 0;
    Dataset ds;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line_no == 1) {
            if (line != "file,split,class_label")
                throw ParseError(dir + "/manifest.csv:1: unexpected header '" + line + "'");
            continue;
        }
        const size_t c1 = line.find(',');
        const size_t c2 = line.find(',', c1 == std::string::npos ? 0 : c1 + 1);
        if (c1 == std::string::npos || c2 == std::string::npos)
            throw ParseError(dir + "/manifest.csv:" + std::to_string(line_no) + ": malformed row");
        const std::string file = line.substr(0, c1);
        const std::string split = line.substr(c1 + 1, c2 - c1 - 1);
        const std::string label = line.substr(c2 + 1);

        const CloudFormat fmt =
            file.size() > 4 && file.substr(file.size() - 4) == ".txt" ? CloudFormat::Text
                                                                      : CloudFormat::Binary;
        PointCloud cloud = read_cloud(dir + "/" + file, fmt);
        if (!label.empty()) cloud.class_label = std::stoi(label);
        ds.samples.push_back(std::move(cloud));
        if (split == "train") ds.split.push_back(Split::Train);
        else if (split == "test") ds.split.push_back(Split::Test);
        else throw ParseError(dir + "/manifest.csv:" + std::to_string(line_no) + ": bad split '" + split + "'");
    }
    if (ds.samples.empty()) throw ParseError(dir + "/manifest.csv: no samples listed");

    std::ifstream desc(dir + "/descriptor.txt");
    if (desc) std::getline(desc, ds.descriptor);
    return ds;
}

// -- checkpoints ----------------------------------------------------------

namespace {
void store_tensor(std::string& out, const std::string& name, const Tensor& t) {
    store_u32(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    store_u32(out, static_cast<std::uint32_t>(t.rank()));
    for (int a = 0; a < t.rank(); ++a) store_u32(out, static_cast<std::uint32_t>(t.dim(a)));
    for (std::int64_t i = 0; i < t.numel(); ++i) store_f64(out, t[i]);
}
} // namespace

void write_checkpoint(const std::string& path, const ParamStore& params,
                      const std::vector<std::pair<std::string, Tensor>>& aux,
                      const std::string& config_text) {
    std::string out;
    out += "MPTC";
    store_u32(out, static_cast<std::uint32_t>(params.count() + static_cast<int>(aux.size())));
    for (int i = 0; i < params.count(); ++i) store_tensor(out, params.name(i), params.tensor(i));
    for (const auto& [name, t] : aux) store_tensor(out, name, t);
    store_u32(out, static_cast<std::uint32_t>(config_text.size()));
    out += config_text;
    spit(path, out);
}

Checkpoint read_checkpoint(const std::string& path) {
    const std::string raw = slurp(path);
    ByteReader r{raw, 0, path};
    if (r.bytes(4) != "MPTC") throw ParseError(path + ": bad magic, not a checkpoint");
    const std::uint32_t count = r.u32();
    Checkpoint ck;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        std::vector<int> shape;
        for (std::uint32_t a = 0; a < rank; ++a) shape.push_back(static_cast<int>(r.u32()));
        Tensor t(shape);
        for (std::int64_t j = 0; j < t.numel(); ++j) t[j] = r.f64();
        ck.tensors.emplace_back(std::move(name), std::move(t));
    }
    const std::uint32_t cfg_len = r.u32();
    ck.config_text = r.bytes(cfg_len);
    return ck;
}

} // namespace pf
