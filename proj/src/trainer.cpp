#include "jsr/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "jsr/evalkit.hpp"

namespace jsr::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (total_iters < 1) throw InvalidParameter("total_iters must be >= 1");
    if (batch < 1) throw InvalidParameter("batch must be >= 1");
    if (patch_size < 8) throw InvalidParameter("patch_size must be >= 8");
    if (!(lr_final < lr_init)) throw InvalidParameter("lr_final must be < lr_init");
    if (!(lr_init > 0.0)) throw InvalidParameter("lr_init must be > 0");
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
        throw InvalidParameter("betas must lie in [0,1)");
    if (weight_decay < 0.0) throw InvalidParameter("weight_decay must be >= 0");
}

TrainState TrainState::fresh(const net::NetworkSpec& spec, uint64_t seed) {
    TrainState st;
    st.spec = spec;
    SeededRng rng(seed);
    st.params = net::build_network(spec, rng);
    st.rng_state = rng.state();
    st.iter = 0;
    for (const auto& [name, t] : st.params.named) {
        st.moment1.emplace_back(t.dims());
        st.moment2.emplace_back(t.dims());
    }
    return st;
}

double mse_loss(const Tensor& sr, const Tensor& hr) {
    if (!sr.same_shape(hr))
        throw InvalidParameter("mse_loss shape mismatch: " + sr.shape_str() + " vs " +
                               hr.shape_str());
    double acc = 0.0;
    for (int64_t i = 0; i < sr.size(); ++i) {
        const double d = sr[i] - hr[i];
        acc += d * d;
    }
    return acc / static_cast<double>(sr.size());
}

double cosine_lr(int64_t iter, const TrainConfig& cfg) {
    if (iter < 0 || iter > cfg.total_iters)
        throw InvalidParameter("cosine_lr iter out of range [0, total_iters]");
    const double t = static_cast<double>(iter) / static_cast<double>(cfg.total_iters);
    return cfg.lr_final +
           0.5 * (cfg.lr_init - cfg.lr_final) * (1.0 + std::cos(3.14159265358979323846 * t));
}

double train_step(TrainState& state, const Tensor& lr_batch, const Tensor& hr_batch,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (state.iter >= cfg.total_iters)
        throw InvalidParameter("train_step called past total_iters");
    std::vector<ops::Var> leaves;
    ops::Var out = net::forward_graph(state.params, state.spec, lr_batch, true, &leaves);
    ops::Var loss = ops::mse(out, ops::leaf(hr_batch, false));
    const double loss_value = loss->value[0];
    const double lr = cosine_lr(state.iter, cfg);
    if (!std::isfinite(loss_value)) {
        std::ostringstream msg;
        msg << "non-finite loss at iter " << state.iter << " (lr=" << lr
            << ", loss=" << loss_value << ")";
        throw std::runtime_error(msg.str());
    }
    ops::backward(loss);

    const int64_t t = state.iter + 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (size_t i = 0; i < state.params.named.size(); ++i) {
        Tensor& p = state.params.named[i].second;
        Tensor& m = state.moment1[i];
        Tensor& v = state.moment2[i];
        const Tensor* g = (leaves[i] && !leaves[i]->grad.empty()) ? &leaves[i]->grad : nullptr;
        for (int64_t k = 0; k < p.size(); ++k) {
            const double gk = g ? (*g)[k] : 0.0;
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * gk;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * gk * gk;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            // decoupled weight decay
            p[k] -= lr * (mhat / (std::sqrt(vhat) + cfg.adam_eps) + cfg.weight_decay * p[k]);
        }
    }
    state.iter = t;
    return loss_value;
}

double validate_psnr(const TrainState& state, const data::Corpus& corpus,
                     const deg::DegradationConfig& dcfg, data::ChannelMode mode, uint64_t seed,
                     int64_t max_images) {
    const int64_t div = state.spec.divisibility() * dcfg.scale;
    int64_t count = 0;
    double acc = 0.0;
    for (size_t i = 0; i < corpus.records.size(); ++i) {
        if (max_images > 0 && count >= max_images) break;
        ImageTensor hr = data::load_for_mode(corpus.records[i], mode);
        const int64_t H = (hr.dim(1) / div) * div;
        const int64_t W = (hr.dim(2) / div) * div;
        if (H < div || W < div) continue;
        // center crop to a compatible size
        ImageTensor hrc({hr.dim(0), H, W});
        const int64_t oy = (hr.dim(1) - H) / 2, ox = (hr.dim(2) - W) / 2;
        for (int64_t c = 0; c < hr.dim(0); ++c)
            for (int64_t y = 0; y < H; ++y)
                for (int64_t x = 0; x < W; ++x) hrc.at3(c, y, x) = hr.at3(c, oy + y, ox + x);
        SeededRng rng = SeededRng::derive(seed, i);  // fixed per image: stable val set
        deg::DegradationMeta meta;
        ImageTensor lr = deg::degrade(hrc, dcfg, rng, meta);
        Tensor batch({1, lr.dim(0), lr.dim(1), lr.dim(2)}, lr.vec());
        Tensor sr4 = net::forward(state.params, state.spec, batch);
        ImageTensor sr({sr4.dim(1), sr4.dim(2), sr4.dim(3)}, sr4.vec());
        for (auto& vv : sr.vec()) vv = std::clamp(vv, 0.0, 1.0);
        const double v = eval::psnr(sr, hrc);
        acc += std::isinf(v) ? 100.0 : v;  // cap the sentinel in aggregates
        ++count;
    }
    if (count == 0) throw DataError("validation corpus has no usable images");
    return acc / static_cast<double>(count);
}

namespace {

std::string format_record(const MetricRecord& r) {
    char buf[160];
    if (r.val_psnr)
        std::snprintf(buf, sizeof(buf), "%lld %.17g %.17g %.17g", static_cast<long long>(r.iter),
                      r.lr, r.train_loss, *r.val_psnr);
    else
        std::snprintf(buf, sizeof(buf), "%lld %.17g %.17g -", static_cast<long long>(r.iter),
                      r.lr, r.train_loss);
    return buf;
}

/// Drops log records newer than the checkpoint we resumed from.
void truncate_log(const fs::path& log, int64_t max_iter) {
    if (!fs::exists(log)) return;
    std::ifstream in(log);
    std::vector<std::string> keep;
    std::string line;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        long long it = -1;
        ls >> it;
        if (it >= 0 && it <= max_iter) keep.push_back(line);
    }
    in.close();
    std::ofstream out(log, std::ios::trunc);
    for (const auto& l : keep) out << l << "\n";
}

}  // namespace

TrainState fit(const data::Corpus& corpus, const net::NetworkSpec& spec, const TrainConfig& cfg,
               const FitOptions& opts, std::vector<MetricRecord>* metrics) {
    cfg.validate();
    spec.validate();
    opts.degradation.validate();
    if (corpus.records.empty()) throw data::EmptyCorpus("fit: empty corpus");

    TrainState state;
    if (opts.resume_from) {
        state = load_checkpoint(*opts.resume_from);
        if (state.spec.to_json() != spec.to_json())
            throw InvalidParameter("checkpoint spec differs from requested spec");
        if (!opts.metric_log.empty()) truncate_log(opts.metric_log, state.iter);
    } else {
        state = TrainState::fresh(spec, cfg.seed);
        if (!opts.metric_log.empty()) {
            std::ofstream clear(opts.metric_log, std::ios::trunc);
        }
    }
    if (!opts.checkpoint_dir.empty()) fs::create_directories(opts.checkpoint_dir);

    std::ofstream log;
    if (!opts.metric_log.empty()) {
        log.open(opts.metric_log, std::ios::app);
        if (!log) throw DataError("cannot open metric log " + opts.metric_log.string());
    }

    const data::ChannelMode mode = opts.channel_mode;
    const int64_t stop_iter =
        opts.stop_after > 0 ? std::min(opts.stop_after, cfg.total_iters) : cfg.total_iters;
    Tensor lr_batch, hr_batch;
    while (state.iter < stop_iter) {
        SeededRng step_rng = SeededRng::derive(cfg.seed, static_cast<uint64_t>(state.iter));
        data::next_batch(corpus, opts.degradation, cfg.batch, cfg.patch_size, mode, step_rng,
                         lr_batch, hr_batch);
        const double loss = train_step(state, lr_batch, hr_batch, cfg);
        const bool last = state.iter == cfg.total_iters;
        const bool stopping = state.iter == stop_iter;
        if ((cfg.log_interval > 0 && state.iter % cfg.log_interval == 0) || last) {
            MetricRecord rec{state.iter, cosine_lr(state.iter, cfg), loss, std::nullopt};
            if (opts.val_corpus &&
                ((cfg.val_interval > 0 && state.iter % cfg.val_interval == 0) || last))
                rec.val_psnr = validate_psnr(state, *opts.val_corpus, opts.degradation, mode,
                                             cfg.seed, cfg.val_max_images);
            if (log.is_open()) log << format_record(rec) << "\n" << std::flush;
            if (metrics) metrics->push_back(rec);
        }
        if (!opts.checkpoint_dir.empty() &&
            ((cfg.checkpoint_interval > 0 && state.iter % cfg.checkpoint_interval == 0) ||
             last || stopping)) {
            save_checkpoint(state, opts.checkpoint_dir / "last.ckpt");
            if (last) save_checkpoint(state, opts.checkpoint_dir / "final.ckpt");
        }
    }
    return state;
}

// ------------------------------------------------------------- checkpoints

namespace {

constexpr char kMagic[8] = {'J', 'S', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in) throw CorruptCheckpoint("truncated checkpoint");
}

void write_tensor_payload(std::ostream& out, const Tensor& t) {
    out.write(reinterpret_cast<const char*>(t.data()),
              static_cast<std::streamsize>(t.size() * sizeof(double)));
}

void read_tensor_payload(std::istream& in, Tensor& t) {
    in.read(reinterpret_cast<char*>(t.data()),
            static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw CorruptCheckpoint("truncated checkpoint payload");
}

}  // namespace

void save_checkpoint(const TrainState& state, const fs::path& path) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write checkpoint " + path.string());
        out.write(kMagic, sizeof(kMagic));
        write_pod(out, kVersion);
        const std::string spec_json = state.spec.to_json();
        write_pod(out, static_cast<uint64_t>(spec_json.size()));
        out.write(spec_json.data(), static_cast<std::streamsize>(spec_json.size()));
        write_pod(out, static_cast<uint64_t>(state.iter));
        for (uint64_t w : state.rng_state.words) write_pod(out, w);
        write_pod(out, static_cast<uint8_t>(state.rng_state.has_spare ? 1 : 0));
        write_pod(out, state.rng_state.spare);
        write_pod(out, static_cast<uint32_t>(state.params.named.size()));
        for (const auto& [name, t] : state.params.named) {
            write_pod(out, static_cast<uint32_t>(name.size()));
            out.write(name.data(), static_cast<std::streamsize>(name.size()));
            write_pod(out, static_cast<uint8_t>(t.ndim()));
            for (int64_t d : t.dims()) write_pod(out, static_cast<uint64_t>(d));
            write_tensor_payload(out, t);
        }
        for (const auto& m : state.moment1) write_tensor_payload(out, m);
        for (const auto& v : state.moment2) write_tensor_payload(out, v);
        if (!out) throw DataError("checkpoint write failed: " + path.string());
    }
    fs::rename(tmp, path);
}

TrainState load_checkpoint(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CorruptCheckpoint("cannot open checkpoint " + path.string());
    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw CorruptCheckpoint("bad checkpoint magic in " + path.string());
    uint32_t version = 0;
    read_pod(in, version);
    if (version != kVersion)
        throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version));
    uint64_t spec_len = 0;
    read_pod(in, spec_len);
    if (spec_len > (1u << 20)) throw CorruptCheckpoint("implausible spec length");
    std::string spec_json(spec_len, '\0');
    in.read(spec_json.data(), static_cast<std::streamsize>(spec_len));
    if (!in) throw CorruptCheckpoint("truncated checkpoint (spec)");

    TrainState state;
    try {
        state.spec = net::NetworkSpec::from_json(spec_json);
    } catch (const std::exception& e) {
        throw CorruptCheckpoint(std::string("bad spec in checkpoint: ") + e.what());
    }
    uint64_t iter = 0;
    read_pod(in, iter);
    state.iter = static_cast<int64_t>(iter);
    for (auto& w : state.rng_state.words) read_pod(in, w);
    uint8_t has_spare = 0;
    read_pod(in, has_spare);
    state.rng_state.has_spare = has_spare != 0;
    read_pod(in, state.rng_state.spare);
    uint32_t n_params = 0;
    read_pod(in, n_params);
    for (uint32_t i = 0; i < n_params; ++i) {
        uint32_t name_len = 0;
        read_pod(in, name_len);
        if (name_len > 4096) throw CorruptCheckpoint("implausible parameter name length");
        std::string name(name_len, '\0');
        in.read(name.data(), name_len);
        if (!in) throw CorruptCheckpoint("truncated checkpoint (name)");
        uint8_t ndim = 0;
        read_pod(in, ndim);
        std::vector<int64_t> dims(ndim);
        for (auto& d : dims) {
            uint64_t dv = 0;
            read_pod(in, dv);
            d = static_cast<int64_t>(dv);
        }
        Tensor t(dims);
        read_tensor_payload(in, t);
        state.params.index[name] = state.params.named.size();
        state.params.named.emplace_back(name, std::move(t));
    }
    for (uint32_t i = 0; i < n_params; ++i) {
        Tensor m(state.params.named[i].second.dims());
        read_tensor_payload(in, m);
        state.moment1.push_back(std::move(m));
    }
    for (uint32_t i = 0; i < n_params; ++i) {
        Tensor v(state.params.named[i].second.dims());
        read_tensor_payload(in, v);
        state.moment2.push_back(std::move(v));
    }
    return state;
}

}  // namespace jsr::train
