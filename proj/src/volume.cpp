#include "vspf/volume.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

namespace vspf {

namespace fs = std::filesystem;

std::array<int, 3> Grid::coords(std::size_t linear) const
{
    const auto nx = static_cast<std::size_t>(dims[0]);
    const auto ny = static_cast<std::size_t>(dims[1]);
    const int i = static_cast<int>(linear % nx);
    const int j = static_cast<int>((linear / nx) % ny);
    const int k = static_cast<int>(linear / (nx * ny));
    return {i, j, k};
}

Vec3 Grid::physical(std::size_t linear) const
{
    const auto c = coords(linear);
    return physical(c[0], c[1], c[2]);
}

Vec3 Grid::center() const
{
    return origin + 0.5 * Vec3((dims[0] - 1) * spacing.x(), (dims[1] - 1) * spacing.y(),
                               (dims[2] - 1) * spacing.z());
}

double Grid::bounding_radius() const
{
    return 0.5 * Vec3((dims[0] - 1) * spacing.x(), (dims[1] - 1) * spacing.y(),
                      (dims[2] - 1) * spacing.z())
                     .norm();
}

void validate(const Grid& grid)
{
    for (int a = 0; a < 3; ++a) {
        if (grid.dims[a] <= 0) throw InvalidArgument("grid dimensions must be positive");
        if (!(grid.spacing[a] > 0.0) || !std::isfinite(grid.spacing[a]))
            throw InvalidArgument("grid spacing must be positive and finite");
        if (!std::isfinite(grid.origin[a])) throw InvalidArgument("grid origin must be finite");
    }
}

Volume::Volume(Grid grid, std::vector<double> data) : grid_(grid), data_(std::move(data))
{
    validate(grid_);
    if (data_.size() != grid_.size()) throw InvalidArgument("data length mismatch");
    for (double v : data_)
        if (!std::isfinite(v)) throw InvalidArgument("volume contains non-finite samples");
}

Volume::Volume(Grid grid, double value) : grid_(grid)
{
    validate(grid_);
    data_.assign(grid_.size(), value);
}

double Volume::min() const
{
    return data_.empty() ? 0.0 : *std::min_element(data_.begin(), data_.end());
}

double Volume::max() const
{
    return data_.empty() ? 0.0 : *std::max_element(data_.begin(), data_.end());
}

VectorField::VectorField(Grid grid, std::vector<Vec3> data) : grid_(grid), data_(std::move(data))
{
    validate(grid_);
    if (data_.size() != grid_.size()) throw InvalidArgument("data length mismatch");
    for (const auto& v : data_)
        if (!v.allFinite()) throw InvalidArgument("vector field contains non-finite samples");
}

bool VectorField::interpolate(const Vec3& q, Vec3& out) const
{
    const auto& d = grid_.dims;
    if (q.x() < 0.0 || q.y() < 0.0 || q.z() < 0.0 || q.x() > d[0] - 1 || q.y() > d[1] - 1 ||
        q.z() > d[2] - 1)
        return false;
    const int i0 = std::min(static_cast<int>(q.x()), std::max(d[0] - 2, 0));
    const int j0 = std::min(static_cast<int>(q.y()), std::max(d[1] - 2, 0));
    const int k0 = std::min(static_cast<int>(q.z()), std::max(d[2] - 2, 0));
    const double fx = q.x() - i0, fy = q.y() - j0, fz = q.z() - k0;
    const int i1 = std::min(i0 + 1, d[0] - 1);
    const int j1 = std::min(j0 + 1, d[1] - 1);
    const int k1 = std::min(k0 + 1, d[2] - 1);
    auto v = [&](int i, int j, int k) -> const Vec3& { return data_[grid_.index(i, j, k)]; };
    const Vec3 c00 = (1 - fx) * v(i0, j0, k0) + fx * v(i1, j0, k0);
    const Vec3 c10 = (1 - fx) * v(i0, j1, k0) + fx * v(i1, j1, k0);
    const Vec3 c01 = (1 - fx) * v(i0, j0, k1) + fx * v(i1, j0, k1);
    const Vec3 c11 = (1 - fx) * v(i0, j1, k1) + fx * v(i1, j1, k1);
    out = (1 - fz) * ((1 - fy) * c00 + fy * c10) + fz * ((1 - fy) * c01 + fy * c11);
    return true;
}

Pyramid::Pyramid(std::vector<Volume> levels) : levels_(std::move(levels))
{
    if (levels_.empty()) throw InvalidArgument("pyramid needs at least one level");
}

const Volume& Pyramid::level(int k) const
{
    if (k < 1 || k > level_count()) throw InvalidArgument("pyramid level out of range");
    return levels_[static_cast<std::size_t>(k - 1)];
}

// ---------------------------------------------------------------------------
// MetaImage I/O

namespace {

std::string trim(std::string s)
{
    const auto not_space = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
    s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
    return s;
}

std::map<std::string, std::string> read_header(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw IoError("cannot open MetaImage header: " + path.string());
    std::map<std::string, std::string> keys;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        keys[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return keys;
}

template <typename T>
std::vector<T> parse_list(const std::string& value, std::size_t count, const std::string& key)
{
    std::istringstream ss(value);
    std::vector<T> out;
    T v{};
    while (ss >> v) out.push_back(v);
    if (out.size() != count) throw IoError("MetaImage key " + key + " needs " +
                                           std::to_string(count) + " values");
    return out;
}

template <typename T>
std::vector<double> decode(const std::vector<char>& bytes)
{
    const std::size_t n = bytes.size() / sizeof(T);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        T v;
        std::memcpy(&v, bytes.data() + i * sizeof(T), sizeof(T));
        if constexpr (std::endian::native == std::endian::big) {
            auto* p = reinterpret_cast<unsigned char*>(&v);
            std::reverse(p, p + sizeof(T));
        }
        out[i] = static_cast<double>(v);
    }
    return out;
}

std::size_t element_size(const std::string& type)
{
    if (type == "MET_SHORT" || type == "MET_USHORT") return 2;
    if (type == "MET_FLOAT") return 4;
    if (type == "MET_DOUBLE") return 8;
    throw IoError("unsupported ElementType: " + type);
}

template <typename T>
void write_raw(const Volume& volume, const fs::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write raw data file: " + path.string());
    for (double d : volume.data()) {
        T v = static_cast<T>(d);
        if constexpr (std::endian::native == std::endian::big) {
            auto* p = reinterpret_cast<unsigned char*>(&v);
            std::reverse(p, p + sizeof(T));
        }
        out.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    if (!out) throw IoError("failed writing raw data file: " + path.string());
}

template <typename T>
void save_as(const Volume& volume, fs::path path, const char* element_type)
{
    if (path.extension() != ".mhd") path.replace_extension(".mhd");
    fs::path raw = path;
    raw.replace_extension(".raw");

    std::ofstream hdr(path);
    if (!hdr) throw IoError("cannot write MetaImage header: " + path.string());
    const Grid& g = volume.grid();
    hdr.precision(17);
    hdr << "ObjectType = Image\n"
        << "NDims = 3\n"
        << "BinaryData = True\n"
        << "BinaryDataByteOrderMSB = False\n"
        << "DimSize = " << g.dims[0] << ' ' << g.dims[1] << ' ' << g.dims[2] << '\n'
        << "ElementSpacing = " << g.spacing.x() << ' ' << g.spacing.y() << ' ' << g.spacing.z()
        << '\n'
        << "Offset = " << g.origin.x() << ' ' << g.origin.y() << ' ' << g.origin.z() << '\n'
        << "ElementType = " << element_type << '\n'
        << "ElementDataFile = " << raw.filename().string() << '\n';
    if (!hdr) throw IoError("failed writing MetaImage header: " + path.string());
    write_raw<T>(volume, raw);
}

}  // namespace

Volume load_volume(const fs::path& path)
{
    if (!fs::exists(path)) throw IoError("file not found: " + path.string());
    const auto keys = read_header(path);
    auto get = [&](const std::string& key) -> const std::string& {
        const auto it = keys.find(key);
        if (it == keys.end()) throw IoError("MetaImage header missing key " + key);
        return it->second;
    };
    if (const auto it = keys.find("NDims"); it != keys.end() && trim(it->second) != "3")
        throw IoError("only 3-dimensional MetaImages are supported");
    if (const auto it = keys.find("BinaryDataByteOrderMSB");
        it != keys.end() && (it->second == "True" || it->second == "true"))
        throw IoError("big-endian MetaImage payloads are not supported");

    Grid grid;
    const auto dims = parse_list<int>(get("DimSize"), 3, "DimSize");
    grid.dims = {dims[0], dims[1], dims[2]};
    if (keys.count("ElementSpacing")) {
        const auto sp = parse_list<double>(keys.at("ElementSpacing"), 3, "ElementSpacing");
        grid.spacing = Vec3(sp[0], sp[1], sp[2]);
    }
    const char* origin_key = keys.count("Offset") ? "Offset" : (keys.count("Origin") ? "Origin" : nullptr);
    if (origin_key) {
        const auto o = parse_list<double>(keys.at(origin_key), 3, origin_key);
        grid.origin = Vec3(o[0], o[1], o[2]);
    }
    try {
        validate(grid);
    } catch (const InvalidArgument& e) {
        throw IoError(std::string("invalid MetaImage geometry: ") + e.what());
    }

    const std::string& type = get("ElementType");
    const std::size_t elem = element_size(type);
    const std::string& data_file = get("ElementDataFile");
    if (data_file == "LOCAL") throw IoError("inline (LOCAL) MetaImage data is not supported");
    fs::path raw = fs::path(data_file);
    if (raw.is_relative()) raw = path.parent_path() / raw;

    std::ifstream in(raw, std::ios::binary);
    if (!in) throw IoError("cannot open raw data file: " + raw.string());
    std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() != grid.size() * elem)
        throw IoError("data length mismatch: header expects " + std::to_string(grid.size()) +
                      " samples, file holds " + std::to_string(bytes.size() / elem));

    std::vector<double> data;
    if (type == "MET_SHORT") data = decode<std::int16_t>(bytes);
    else if (type == "MET_USHORT") data = decode<std::uint16_t>(bytes);
    else if (type == "MET_FLOAT") data = decode<float>(bytes);
    else data = decode<double>(bytes);

    for (double v : data)
        if (!std::isfinite(v)) throw IoError("non-finite sample in " + raw.string());
    return Volume(grid, std::move(data));
}

void save_volume(const Volume& volume, const fs::path& path)
{
    save_as<double>(volume, path, "MET_DOUBLE");
}

void save_volume_float(const Volume& volume, const fs::path& path)
{
    save_as<float>(volume, path, "MET_FLOAT");
}

// ---------------------------------------------------------------------------
// Interpolation

namespace {

inline double catmull_rom(double t)
{
    constexpr double a = -0.5;
    t = std::abs(t);
    if (t < 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
    if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
    return 0.0;
}

inline int clamp_index(int i, int n)
{
    return std::clamp(i, 0, n - 1);
}

}  // namespace

double sample_cubic(const Volume& volume, const Vec3& q)
{
    const auto& d = volume.grid().dims;
    int base[3];
    double w[3][4];
    for (int a = 0; a < 3; ++a) {
        const double f = std::floor(q[a]);
        base[a] = static_cast<int>(f) - 1;
        const double frac = q[a] - f;
        for (int t = 0; t < 4; ++t) w[a][t] = catmull_rom(frac + 1.0 - t);
    }
    double acc = 0.0;
    for (int tz = 0; tz < 4; ++tz) {
        const int k = clamp_index(base[2] + tz, d[2]);
        for (int ty = 0; ty < 4; ++ty) {
            const int j = clamp_index(base[1] + ty, d[1]);
            const double wyz = w[2][tz] * w[1][ty];
            if (wyz == 0.0) continue;
            for (int tx = 0; tx < 4; ++tx) {
                const int i = clamp_index(base[0] + tx, d[0]);
                acc += wyz * w[0][tx] * volume.at(i, j, k);
            }
        }
    }
    return acc;
}

double sample_linear(const Volume& volume, const Vec3& q)
{
    const auto& d = volume.grid().dims;
    int i0[3];
    double f[3];
    for (int a = 0; a < 3; ++a) {
        const double c = std::clamp(q[a], 0.0, static_cast<double>(d[a] - 1));
        i0[a] = std::min(static_cast<int>(c), std::max(d[a] - 2, 0));
        f[a] = c - i0[a];
    }
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? f[0] : 1 - f[0]) * (dy ? f[1] : 1 - f[1]) *
                                 (dz ? f[2] : 1 - f[2]);
                if (w == 0.0) continue;
                acc += w * volume.at(clamp_index(i0[0] + dx, d[0]), clamp_index(i0[1] + dy, d[1]),
                                     clamp_index(i0[2] + dz, d[2]));
            }
    return acc;
}

Volume resample_isotropic(const Volume& volume, double target_spacing)
{
    if (!(target_spacing > 0.0)) throw InvalidArgument("target spacing must be positive");
    const Grid& in = volume.grid();
    Grid out;
    out.spacing = Vec3::Constant(target_spacing);
    out.origin = in.origin;
    for (int a = 0; a < 3; ++a) {
        const double extent = (in.dims[a] - 1) * in.spacing[a];
        out.dims[a] = static_cast<int>(std::floor(extent / target_spacing + 1e-9)) + 1;
        if (out.dims[a] < 2) throw InvalidArgument("resampled volume would be degenerate");
    }
    std::vector<double> data(out.size());
    std::size_t n = 0;
    for (int k = 0; k < out.dims[2]; ++k)
        for (int j = 0; j < out.dims[1]; ++j)
            for (int i = 0; i < out.dims[0]; ++i)
                data[n++] = sample_cubic(volume, in.continuous_index(out.physical(i, j, k)));
    return Volume(out, std::move(data));
}

// ---------------------------------------------------------------------------
// Filtering

namespace {

std::vector<double> gaussian_kernel(double sigma_mm, double spacing)
{
    const int radius = static_cast<int>(std::ceil(3.0 * sigma_mm / spacing));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int t = -radius; t <= radius; ++t) {
        const double x = t * spacing;
        k[static_cast<std::size_t>(t + radius)] = std::exp(-0.5 * x * x / (sigma_mm * sigma_mm));
        sum += k[static_cast<std::size_t>(t + radius)];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Convolves along one axis with clamp-to-edge boundaries.
void convolve_axis(const std::vector<double>& src, std::vector<double>& dst, const Grid& g, int axis,
                   const std::vector<double>& kernel)
{
    const int radius = static_cast<int>(kernel.size() / 2);
    const int n = g.dims[axis];
    const std::size_t stride = axis == 0 ? 1 : (axis == 1 ? static_cast<std::size_t>(g.dims[0])
                                                          : static_cast<std::size_t>(g.dims[0]) * g.dims[1]);
    std::vector<double> line(static_cast<std::size_t>(n));
    const int o1 = axis == 0 ? 1 : 0;
    const int o2 = axis == 2 ? 1 : 2;
    for (int b = 0; b < g.dims[o2]; ++b)
        for (int a = 0; a < g.dims[o1]; ++a) {
            int ijk[3] = {0, 0, 0};
            ijk[o1] = a;
            ijk[o2] = b;
            const std::size_t start = g.index(ijk[0], ijk[1], ijk[2]);
            for (int t = 0; t < n; ++t) line[static_cast<std::size_t>(t)] = src[start + t * stride];
            for (int t = 0; t < n; ++t) {
                double acc = 0.0;
                for (int r = -radius; r <= radius; ++r)
                    acc += kernel[static_cast<std::size_t>(r + radius)] *
                           line[static_cast<std::size_t>(clamp_index(t + r, n))];
                dst[start + t * stride] = acc;
            }
        }
}

}  // namespace

Volume gaussian_smooth(const Volume& volume, double sigma_mm)
{
    if (sigma_mm < 0.0) throw InvalidArgument("sigma must be non-negative");
    if (sigma_mm == 0.0) return volume;
    const Grid& g = volume.grid();
    std::vector<double> a(volume.data().begin(), volume.data().end());
    std::vector<double> b(a.size());
    for (int axis = 0; axis < 3; ++axis) {
        const auto kernel = gaussian_kernel(sigma_mm, g.spacing[axis]);
        if (kernel.size() == 1) continue;
        convolve_axis(a, b, g, axis, kernel);
        std::swap(a, b);
    }
    return Volume(g, std::move(a));
}

VectorField spatial_gradient(const Volume& volume)
{
    const Grid& g = volume.grid();
    for (int a = 0; a < 3; ++a)
        if (g.dims[a] < 2) throw InvalidArgument("gradient needs at least 2 voxels per axis");
    std::vector<Vec3> out(g.size());
    for (int k = 0; k < g.dims[2]; ++k)
        for (int j = 0; j < g.dims[1]; ++j)
            for (int i = 0; i < g.dims[0]; ++i) {
                const int idx[3] = {i, j, k};
                Vec3 grad;
                for (int a = 0; a < 3; ++a) {
                    int lo[3] = {i, j, k};
                    int hi[3] = {i, j, k};
                    double span = 2.0;
                    if (idx[a] == 0) {
                        hi[a] = 1;
                        span = 1.0;
                    } else if (idx[a] == g.dims[a] - 1) {
                        lo[a] = idx[a] - 1;
                        span = 1.0;
                    } else {
                        lo[a] = idx[a] - 1;
                        hi[a] = idx[a] + 1;
                    }
                    grad[a] = (volume.at(hi[0], hi[1], hi[2]) - volume.at(lo[0], lo[1], lo[2])) /
                              (span * g.spacing[a]);
                }
                out[g.index(i, j, k)] = grad;
            }
    return VectorField(g, std::move(out));
}

Volume decimate(const Volume& volume)
{
    const Grid& in = volume.grid();
    Grid out;
    out.origin = in.origin;
    out.spacing = 2.0 * in.spacing;
    for (int a = 0; a < 3; ++a) out.dims[a] = (in.dims[a] + 1) / 2;
    std::vector<double> data(out.size());
    std::size_t n = 0;
    for (int k = 0; k < out.dims[2]; ++k)
        for (int j = 0; j < out.dims[1]; ++j)
            for (int i = 0; i < out.dims[0]; ++i) data[n++] = volume.at(2 * i, 2 * j, 2 * k);
    return Volume(out, std::move(data));
}

Pyramid build_pyramid(const Volume& volume, int levels)
{
    if (levels < 1) throw InvalidArgument("pyramid needs at least one level");
    std::array<int, 3> dims = volume.grid().dims;
    for (int l = 1; l < levels; ++l)
        for (int& d : dims) d = (d + 1) / 2;
    for (int d : dims)
        if (d < 4) throw InvalidArgument("too many pyramid levels for this volume size");

    std::vector<Volume> out;
    out.reserve(static_cast<std::size_t>(levels));
    out.push_back(volume);
    for (int l = 1; l < levels; ++l) {
        const Volume& prev = out.back();
        const double sigma = 0.8 * prev.grid().spacing.maxCoeff();
        out.push_back(decimate(gaussian_smooth(prev, sigma)));
    }
    return Pyramid(std::move(out));
}

}  // namespace vspf
