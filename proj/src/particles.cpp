#include "repulse/particles.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "repulse/rng.hpp"
#include "repulse/util.hpp"

namespace repulse {

void ParticleSet::validate() const {
    base_spec.validate();
    if (particles.empty()) throw DimensionError("particle set is empty");
    if (mode == ParticleMode::MultiHead) {
        head_spec.validate();
        if (head_spec.input_dim() != base_spec.output_dim())
            throw DimensionError("head input width " + std::to_string(head_spec.input_dim()) +
                                 " does not match base feature width " +
                                 std::to_string(base_spec.output_dim()));
        if (base_params.size() != parameter_count(base_spec))
            throw DimensionError("base parameter vector length mismatch");
    }
    const std::size_t expect = parameter_count(particle_spec());
    for (const ParamVector& p : particles)
        if (p.size() != expect) throw DimensionError("particle parameter vector length mismatch");
}

ParticleSet init_full_ensemble(const MlpSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw DimensionError("particle count must be at least 1");
    ParticleSet ps;
    ps.mode = ParticleMode::FullEnsemble;
    ps.base_spec = spec;
    ps.rng_seed = seed;
    ps.particles.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        ps.particles.push_back(init_params(spec, derive_seed(seed, i + 1)));
    ps.validate();
    return ps;
}

ParticleSet init_multi_head(const MlpSpec& base_spec, const MlpSpec& head_spec, std::size_t n,
                            std::uint64_t seed) {
    if (n == 0) throw DimensionError("particle count must be at least 1");
    ParticleSet ps;
    ps.mode = ParticleMode::MultiHead;
    ps.base_spec = base_spec;
    ps.head_spec = head_spec;
    ps.rng_seed = seed;
    ps.base_params = init_params(base_spec, derive_seed(seed, 0));
    ps.particles.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        ps.particles.push_back(init_params(head_spec, derive_seed(seed, i + 1)));
    ps.validate();
    return ps;
}

ParticleSet clone_from_map(const ParticleSet& proto, const ParamVector& map_params,
                           std::size_t n) {
    if (n == 0) throw DimensionError("particle count must be at least 1");
    if (map_params.size() != parameter_count(proto.particle_spec()))
        throw DimensionError("map parameter vector length mismatch");
    ParticleSet ps = proto;
    ps.particles.assign(n, map_params);
    ps.validate();
    return ps;
}

Matrix base_features(const ParticleSet& ps, const Matrix& inputs) {
    if (ps.mode != ParticleMode::MultiHead)
        throw DimensionError("base features exist only in multi-head mode");
    Matrix feats = forward(ps.base_params, ps.base_spec, inputs);
    for (double& x : feats.data) x = activation_apply(ps.base_spec.activation, x);
    return feats;
}

std::vector<Matrix> predict_all(const ParticleSet& ps, const Matrix& inputs) {
    ps.validate();
    if (inputs.cols != ps.input_dim())
        throw DimensionError("input width " + std::to_string(inputs.cols) +
                             " does not match network input width " +
                             std::to_string(ps.input_dim()));
    std::vector<Matrix> out(ps.n());
    if (ps.mode == ParticleMode::MultiHead) {
        const Matrix feats = base_features(ps, inputs);
        parallel_for(ps.n(), [&](std::size_t i) {
            out[i] = forward(ps.particles[i], ps.head_spec, feats);
        });
    } else {
        parallel_for(ps.n(), [&](std::size_t i) {
            out[i] = forward(ps.particles[i], ps.base_spec, inputs);
        });
    }
    return out;
}

Matrix particle_matrix(const ParticleSet& ps) {
    const std::size_t p = parameter_count(ps.particle_spec());
    Matrix m(ps.n(), p);
    for (std::size_t i = 0; i < ps.n(); ++i)
        std::memcpy(m.row(i), ps.particles[i].data(), p * sizeof(double));
    return m;
}

std::size_t trainable_parameter_count(const ParticleSet& ps) {
    std::size_t total = ps.n() * parameter_count(ps.particle_spec());
    if (ps.mode == ParticleMode::MultiHead && !ps.base_frozen)
        total += parameter_count(ps.base_spec);
    return total;
}

namespace {

constexpr char kMagic[4] = {'R', 'P', 'V', 'E'};
constexpr std::uint16_t kVersion = 1;

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t len) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

struct ByteWriter {
    std::vector<std::uint8_t> bytes;

    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f64(double v) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, 8);
        u64(bits);
    }
    void spec(const MlpSpec& s) {
        u32(static_cast<std::uint32_t>(s.layer_widths.size()));
        for (std::size_t w : s.layer_widths) u32(static_cast<std::uint32_t>(w));
        u8(static_cast<std::uint8_t>(s.activation));
    }
};

struct ByteReader {
    const std::uint8_t* data;
    std::size_t len;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > len) throw TruncatedCheckpointError("checkpoint ends mid-record");
    }
    std::uint8_t u8() {
        need(1);
        return data[pos++];
    }
    std::uint16_t u16() {
        need(2);
        std::uint16_t v = 0;
        for (int i = 0; i < 2; ++i) v |= static_cast<std::uint16_t>(data[pos++]) << (8 * i);
        return v;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos++]) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos++]) << (8 * i);
        return v;
    }
    double f64() {
        const std::uint64_t bits = u64();
        double v = 0.0;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    MlpSpec spec() {
        MlpSpec s;
        const std::uint32_t count = u32();
        s.layer_widths.resize(count);
        for (std::uint32_t i = 0; i < count; ++i) s.layer_widths[i] = u32();
        s.activation = static_cast<Activation>(u8());
        return s;
    }
};

}  // namespace

void save_checkpoint(const ParticleSet& ps, const std::string& path) {
    ps.validate();
    ByteWriter w;
    for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u16(kVersion);
    const std::size_t digest_start = w.bytes.size();
    w.u8(static_cast<std::uint8_t>(ps.mode));
    w.u8(ps.base_frozen ? 1 : 0);
    w.spec(ps.base_spec);
    if (ps.mode == ParticleMode::MultiHead) {
        w.spec(ps.head_spec);
    } else {
        w.u32(0);
        w.u8(0);
    }
    w.u32(static_cast<std::uint32_t>(ps.n()));
    w.u64(ps.rng_seed);
    w.u64(ps.step_counter);
    w.u64(fnv1a64(w.bytes.data() + digest_start, w.bytes.size() - digest_start));
    if (ps.mode == ParticleMode::MultiHead)
        for (double v : ps.base_params) w.f64(v);
    for (const ParamVector& p : ps.particles)
        for (double v : p) w.f64(v);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
    if (!out) throw CheckpointError("short write to " + path);
}

ParticleSet load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    ByteReader r{bytes.data(), bytes.size()};

    if (bytes.size() < 4) throw TruncatedCheckpointError("file shorter than the magic");
    for (char c : kMagic)
        if (r.u8() != static_cast<std::uint8_t>(c))
            throw BadMagicError("not a checkpoint file: " + path);
    const std::uint16_t version = r.u16();
    if (version != kVersion)
        throw VersionMismatchError("checkpoint version " + std::to_string(version) +
                                   ", expected " + std::to_string(kVersion));

    const std::size_t digest_start = r.pos;
    ParticleSet ps;
    ps.mode = static_cast<ParticleMode>(r.u8());
    ps.base_frozen = r.u8() != 0;
    ps.base_spec = r.spec();
    ps.head_spec = r.spec();
    const std::uint32_t n = r.u32();
    ps.rng_seed = r.u64();
    ps.step_counter = r.u64();
    const std::size_t digest_end = r.pos;
    const std::uint64_t stored = r.u64();
    const std::uint64_t computed =
        fnv1a64(bytes.data() + digest_start, digest_end - digest_start);
    if (stored != computed)
        throw SpecDigestMismatchError("checkpoint header digest mismatch in " + path);

    if (n == 0) throw CheckpointError("checkpoint holds no particles");
    if (ps.mode == ParticleMode::MultiHead) {
        ps.base_params.resize(parameter_count(ps.base_spec));
        for (double& v : ps.base_params) v = r.f64();
    } else {
        ps.head_spec = MlpSpec{};
    }
    const std::size_t per_particle = parameter_count(ps.particle_spec());
    ps.particles.assign(n, ParamVector(per_particle));
    for (std::uint32_t i = 0; i < n; ++i)
        for (double& v : ps.particles[i]) v = r.f64();
    ps.validate();
    return ps;
}

}  // namespace repulse
