#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "arbr/core.hpp"

namespace arbr::drqn {

// ---------------------------------------------------------------------------
// Observation: 8 log returns + reduced indicator features + the ARBR pair.
// ---------------------------------------------------------------------------

struct StateVector {
    std::vector<double> returns;
    std::vector<double> pca;
    double ar = 0.0;
    double br = 0.0;

    std::size_t width() const { return returns.size() + pca.size() + 2; }

    void flatten_into(std::span<double> out) const {
        std::size_t p = 0;
        for (double x : returns) out[p++] = x;
        for (double x : pca) out[p++] = x;
        out[p++] = ar;
        out[p] = br;
    }

    std::vector<double> flatten() const {
        std::vector<double> out(width());
        flatten_into(out);
        return out;
    }
};

struct Transition {
    std::vector<StateVector> state;
    int action = 0;  // -1 sell, 0 hold, +1 buy
    double reward = 0.0;
    std::vector<StateVector> next_state;
    bool terminal = false;
};

// ---------------------------------------------------------------------------
// Recurrent value function: one LSTM layer, linear head to 3 action values
// ordered [sell, hold, buy].
// ---------------------------------------------------------------------------

// gate order: input, forget, output, candidate
enum GateIndex { kGateI = 0, kGateF = 1, kGateO = 2, kGateG = 3 };

struct QNetwork {
    int input_width = 0;
    int hidden = 0;
    std::array<Matrix, 4> w_in;                 // h x w
    std::array<Matrix, 4> w_rec;                // h x h
    std::array<std::vector<double>, 4> bias;    // h
    Matrix w_out;                               // 3 x h
    std::array<double, 3> b_out{};

    std::size_t param_count() const {
        const std::size_t h = static_cast<std::size_t>(hidden);
        const std::size_t w = static_cast<std::size_t>(input_width);
        return 4 * h * (w + h + 1) + 3 * (h + 1);
    }

    template <typename F>
    void for_each_param(F&& f) {
        for (auto& m : w_in) for (double& x : m.v) f(x);
        for (auto& m : w_rec) for (double& x : m.v) f(x);
        for (auto& b : bias) for (double& x : b) f(x);
        for (double& x : w_out.v) f(x);
        for (double& x : b_out) f(x);
    }
};

struct LstmCarry {
    std::vector<double> h, c;
};

struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;
    double anneal_frac = 0.2;  // fraction of total steps spent annealing
};

struct TrainingConfig {
    double alpha = 1e-3;  // gradient step size
    double gamma = 0.9;   // discount
    EpsilonSchedule epsilon;
    int batch_size = 32;
    int seq_len = 8;
    int hidden = 32;
    int sync_interval = 200;       // target-network refresh, in training steps
    std::size_t replay_capacity = 10000;
    std::uint64_t seed = 1;
    int episodes = 20;             // passes over the training slice

    void validate() const {
        if (!(alpha > 0.0)) throw Error(ErrorKind::Config, "alpha must be positive");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorKind::Config, "gamma must be in [0,1)");
        if (!(epsilon.start >= 0.0 && epsilon.start <= 1.0 && epsilon.end >= 0.0 && epsilon.end <= 1.0))
            throw Error(ErrorKind::Config, "epsilon must be in [0,1]");
        if (!(epsilon.anneal_frac >= 0.0 && epsilon.anneal_frac <= 1.0))
            throw Error(ErrorKind::Config, "epsilon anneal fraction must be in [0,1]");
        if (batch_size < 1) throw Error(ErrorKind::Config, "batch_size must be >= 1");
        if (seq_len < 1) throw Error(ErrorKind::Config, "seq_len must be >= 1");
        if (hidden < 1) throw Error(ErrorKind::Config, "hidden size must be >= 1");
        if (sync_interval < 1) throw Error(ErrorKind::Config, "sync_interval must be >= 1");
        if (replay_capacity == 0) throw Error(ErrorKind::Config, "replay capacity must be positive");
        if (episodes < 0) throw Error(ErrorKind::Config, "episodes must be >= 0");
    }
};

inline double epsilon_at(const EpsilonSchedule& s, std::size_t step, std::size_t total_steps) {
    const double anneal = s.anneal_frac * static_cast<double>(total_steps);
    if (anneal <= 0.0) return s.end;
    const double frac = std::min(1.0, static_cast<double>(step) / anneal);
    return s.start + frac * (s.end - s.start);
}

// Parameters drawn uniform(-1/sqrt(h), 1/sqrt(h)); deterministic in the seed.
inline QNetwork init_network(const TrainingConfig& cfg, int input_width) {
    cfg.validate();
    if (input_width < 1) throw Error(ErrorKind::Config, "input width must be >= 1");
    QNetwork net;
    net.input_width = input_width;
    net.hidden = cfg.hidden;
    const std::size_t h = static_cast<std::size_t>(cfg.hidden);
    const std::size_t w = static_cast<std::size_t>(input_width);
    for (auto& m : net.w_in) m = Matrix(h, w);
    for (auto& m : net.w_rec) m = Matrix(h, h);
    for (auto& b : net.bias) b.assign(h, 0.0);
    net.w_out = Matrix(3, h);

    Rng rng(cfg.seed);
    const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden));
    net.for_each_param([&](double& x) { x = rng.uniform(-bound, bound); });
    return net;
}

namespace detail {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct StepTrace {
    std::vector<double> x, h_prev, c_prev;
    std::vector<double> i, f, o, g, c, tanh_c, h;
};

inline void check_sequence(const QNetwork& net, std::span<const StateVector> seq) {
    if (seq.empty()) throw Error(ErrorKind::Contract, "forward: empty state sequence");
    for (const auto& s : seq) {
        if (s.width() != static_cast<std::size_t>(net.input_width))
            throw Error(ErrorKind::Dimension, "forward: state width does not match network input");
        for (double x : s.returns)
            if (!std::isfinite(x)) throw Error(ErrorKind::Domain, "forward: non-finite state entry");
        for (double x : s.pca)
            if (!std::isfinite(x)) throw Error(ErrorKind::Domain, "forward: non-finite state entry");
        if (!std::isfinite(s.ar) || !std::isfinite(s.br))
            throw Error(ErrorKind::Domain, "forward: non-finite state entry");
    }
}

// One LSTM step; writes gates and states into the trace when given.
inline void lstm_step(const QNetwork& net, std::span<const double> x,
                      std::vector<double>& hcur, std::vector<double>& ccur,
                      StepTrace* trace) {
    const std::size_t h = static_cast<std::size_t>(net.hidden);
    const std::size_t w = static_cast<std::size_t>(net.input_width);
    std::array<std::vector<double>, 4> act;
    for (int gi = 0; gi < 4; ++gi) {
        act[gi].assign(h, 0.0);
        const Matrix& wi = net.w_in[gi];
        const Matrix& wr = net.w_rec[gi];
        for (std::size_t j = 0; j < h; ++j) {
            double s = net.bias[gi][j];
            const double* wij = wi.row_ptr(j);
            for (std::size_t m = 0; m < w; ++m) s += wij[m] * x[m];
            const double* wrj = wr.row_ptr(j);
            for (std::size_t m = 0; m < h; ++m) s += wrj[m] * hcur[m];
            act[gi][j] = s;
        }
    }
    if (trace) {
        trace->x.assign(x.begin(), x.end());
        trace->h_prev = hcur;
        trace->c_prev = ccur;
        trace->i.resize(h); trace->f.resize(h); trace->o.resize(h); trace->g.resize(h);
        trace->c.resize(h); trace->tanh_c.resize(h); trace->h.resize(h);
    }
    for (std::size_t j = 0; j < h; ++j) {
        const double gi = sigmoid(act[kGateI][j]);
        const double gf = sigmoid(act[kGateF][j]);
        const double go = sigmoid(act[kGateO][j]);
        const double gg = std::tanh(act[kGateG][j]);
        const double c = gf * ccur[j] + gi * gg;
        const double tc = std::tanh(c);
        const double hh = go * tc;
        if (trace) {
            trace->i[j] = gi; trace->f[j] = gf; trace->o[j] = go; trace->g[j] = gg;
            trace->c[j] = c; trace->tanh_c[j] = tc; trace->h[j] = hh;
        }
        ccur[j] = c;
        hcur[j] = hh;
    }
}

inline std::array<double, 3> head(const QNetwork& net, const std::vector<double>& hvec) {
    std::array<double, 3> q{};
    for (std::size_t a = 0; a < 3; ++a) {
        double s = net.b_out[a];
        const double* row = net.w_out.row_ptr(a);
        for (std::size_t j = 0; j < static_cast<std::size_t>(net.hidden); ++j) s += row[j] * hvec[j];
        q[a] = s;
    }
    return q;
}

}  // namespace detail

struct ForwardResult {
    std::array<double, 3> q{};  // [sell, hold, buy]
    LstmCarry carry;
};

inline ForwardResult forward(const QNetwork& net, std::span<const StateVector> seq,
                             const LstmCarry* carry0 = nullptr) {
    detail::check_sequence(net, seq);
    const std::size_t h = static_cast<std::size_t>(net.hidden);
    ForwardResult r;
    r.carry.h.assign(h, 0.0);
    r.carry.c.assign(h, 0.0);
    if (carry0) {
        if (carry0->h.size() != h || carry0->c.size() != h)
            throw Error(ErrorKind::Dimension, "forward: carry size mismatch");
        r.carry = *carry0;
    }
    std::vector<double> x(net.input_width);
    for (const auto& s : seq) {
        s.flatten_into(x);
        detail::lstm_step(net, x, r.carry.h, r.carry.c, nullptr);
    }
    r.q = detail::head(net, r.carry.h);
    return r;
}

// Greedy index with declared tie order: hold, then sell, then buy.
inline int greedy_action(const std::array<double, 3>& q) {
    for (double v : q)
        if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "action values must be finite");
    const double m = std::max({q[0], q[1], q[2]});
    if (q[1] == m) return 0;
    if (q[0] == m) return -1;
    return 1;
}

// Epsilon-greedy over {-1, 0, 1}; exploration draws uniformly from all three.
inline int select_action(const std::array<double, 3>& q, double epsilon, Rng& rng) {
    if (!(epsilon >= 0.0 && epsilon <= 1.0))
        throw Error(ErrorKind::Config, "epsilon must be in [0,1]");
    for (double v : q)
        if (!std::isfinite(v)) throw Error(ErrorKind::Domain, "action values must be finite");
    if (rng.uniform() < epsilon) return static_cast<int>(rng.uniform_int(3)) - 1;
    return greedy_action(q);
}

// reward + gamma * max(next_q), or reward alone on terminal transitions
inline double td_target(double reward, const std::array<double, 3>& next_q, double gamma,
                        bool terminal) {
    if (!(gamma >= 0.0 && gamma < 1.0)) throw Error(ErrorKind::Config, "gamma must be in [0,1)");
    if (terminal) return reward;
    return reward + gamma * std::max({next_q[0], next_q[1], next_q[2]});
}

// ---------------------------------------------------------------------------
// Experience replay: fixed-capacity ring, oldest-first eviction.
// ---------------------------------------------------------------------------

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity == 0) throw Error(ErrorKind::Config, "replay capacity must be positive");
    }

    std::size_t size() const { return buf_.size(); }
    std::size_t capacity() const { return capacity_; }

    void push(Transition t) {
        if (buf_.size() < capacity_) {
            buf_.push_back(std::move(t));
        } else {
            buf_[next_] = std::move(t);
            next_ = (next_ + 1) % capacity_;
        }
    }

    // Uniform sample without replacement.
    std::vector<Transition> sample(std::size_t batch, Rng& rng) const {
        if (batch > buf_.size())
            throw Error(ErrorKind::InsufficientData, "replay: fewer transitions than batch size");
        std::vector<std::size_t> idx(buf_.size());
        for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
        std::vector<Transition> out;
        out.reserve(batch);
        for (std::size_t i = 0; i < batch; ++i) {
            const std::size_t j = i + rng.uniform_int(idx.size() - i);
            std::swap(idx[i], idx[j]);
            out.push_back(buf_[idx[i]]);
        }
        return out;
    }

    // Oldest to newest, for serialization.
    std::vector<Transition> snapshot() const {
        std::vector<Transition> out;
        out.reserve(buf_.size());
        if (buf_.size() < capacity_) {
            out = buf_;
        } else {
            for (std::size_t i = 0; i < capacity_; ++i) out.push_back(buf_[(next_ + i) % capacity_]);
        }
        return out;
    }

    void restore(std::vector<Transition> items) {
        if (items.size() > capacity_)
            throw Error(ErrorKind::Contract, "replay restore: more items than capacity");
        buf_ = std::move(items);
        next_ = 0;
        if (buf_.size() == capacity_) next_ = 0;
    }

private:
    std::size_t capacity_;
    std::vector<Transition> buf_;
    std::size_t next_ = 0;
};

inline void sync_target(const QNetwork& net, QNetwork& target) { target = net; }

// ---------------------------------------------------------------------------
// Training step: mean-squared TD error, backpropagation through time,
// one plain gradient-descent update of size alpha.
// ---------------------------------------------------------------------------

struct Gradients {
    std::array<Matrix, 4> w_in;
    std::array<Matrix, 4> w_rec;
    std::array<std::vector<double>, 4> bias;
    Matrix w_out;
    std::array<double, 3> b_out{};

    explicit Gradients(const QNetwork& net) {
        const std::size_t h = static_cast<std::size_t>(net.hidden);
        const std::size_t w = static_cast<std::size_t>(net.input_width);
        for (auto& m : w_in) m = Matrix(h, w);
        for (auto& m : w_rec) m = Matrix(h, h);
        for (auto& b : bias) b.assign(h, 0.0);
        w_out = Matrix(3, h);
    }

    double squared_norm() const {
        double s = 0.0;
        for (const auto& m : w_in) for (double x : m.v) s += x * x;
        for (const auto& m : w_rec) for (double x : m.v) s += x * x;
        for (const auto& b : bias) for (double x : b) s += x * x;
        for (double x : w_out.v) s += x * x;
        for (double x : b_out) s += x * x;
        return s;
    }

    // Same iteration order as QNetwork::for_each_param.
    template <typename F>
    void for_each_param(F&& f) {
        for (auto& m : w_in) for (double& x : m.v) f(x);
        for (auto& m : w_rec) for (double& x : m.v) f(x);
        for (auto& b : bias) for (double& x : b) f(x);
        for (double& x : w_out.v) f(x);
        for (double& x : b_out) f(x);
    }
};

namespace detail {

struct TraceResult {
    std::array<double, 3> q{};
    std::vector<StepTrace> steps;
};

inline TraceResult forward_trace(const QNetwork& net, std::span<const StateVector> seq) {
    check_sequence(net, seq);
    const std::size_t h = static_cast<std::size_t>(net.hidden);
    TraceResult r;
    r.steps.resize(seq.size());
    std::vector<double> hcur(h, 0.0), ccur(h, 0.0), x(net.input_width);
    for (std::size_t t = 0; t < seq.size(); ++t) {
        seq[t].flatten_into(x);
        lstm_step(net, x, hcur, ccur, &r.steps[t]);
    }
    r.q = head(net, hcur);
    return r;
}

// Accumulates d(loss)/d(params) for one sequence whose selected-action output
// receives upstream gradient dq.
inline void backprop_sequence(const QNetwork& net, const TraceResult& trace, int action_index,
                              double dq, Gradients& grads) {
    const std::size_t h = static_cast<std::size_t>(net.hidden);
    const std::size_t w = static_cast<std::size_t>(net.input_width);
    const std::size_t T = trace.steps.size();

    std::vector<double> dh(h, 0.0), dc(h, 0.0);
    const StepTrace& last = trace.steps[T - 1];
    {
        double* gw = grads.w_out.row_ptr(static_cast<std::size_t>(action_index));
        const double* wo = net.w_out.row_ptr(static_cast<std::size_t>(action_index));
        for (std::size_t j = 0; j < h; ++j) {
            gw[j] += dq * last.h[j];
            dh[j] = wo[j] * dq;
        }
        grads.b_out[static_cast<std::size_t>(action_index)] += dq;
    }

    std::array<std::vector<double>, 4> da;
    for (auto& v : da) v.assign(h, 0.0);

    for (std::size_t tt = T; tt-- > 0;) {
        const StepTrace& st = trace.steps[tt];
        for (std::size_t j = 0; j < h; ++j) {
            const double do_j = dh[j] * st.tanh_c[j];
            const double dct = dc[j] + dh[j] * st.o[j] * (1.0 - st.tanh_c[j] * st.tanh_c[j]);
            const double di = dct * st.g[j];
            const double df = dct * st.c_prev[j];
            const double dg = dct * st.i[j];
            da[kGateI][j] = di * st.i[j] * (1.0 - st.i[j]);
            da[kGateF][j] = df * st.f[j] * (1.0 - st.f[j]);
            da[kGateO][j] = do_j * st.o[j] * (1.0 - st.o[j]);
            da[kGateG][j] = dg * (1.0 - st.g[j] * st.g[j]);
            dc[j] = dct * st.f[j];
        }
        for (int gi = 0; gi < 4; ++gi) {
            Matrix& gwi = grads.w_in[gi];
            Matrix& gwr = grads.w_rec[gi];
            for (std::size_t j = 0; j < h; ++j) {
                const double d = da[gi][j];
                if (d == 0.0) continue;
                double* rin = gwi.row_ptr(j);
                for (std::size_t m = 0; m < w; ++m) rin[m] += d * st.x[m];
                double* rrec = gwr.row_ptr(j);
                for (std::size_t m = 0; m < h; ++m) rrec[m] += d * st.h_prev[m];
                grads.bias[gi][j] += d;
            }
        }
        for (std::size_t m = 0; m < h; ++m) {
            double s = 0.0;
            for (int gi = 0; gi < 4; ++gi) {
                const Matrix& wr = net.w_rec[gi];
                for (std::size_t j = 0; j < h; ++j) s += wr(j, m) * da[gi][j];
            }
            dh[m] = s;
        }
    }
}

}  // namespace detail

struct BatchEval {
    double loss = 0.0;  // mean-squared TD error
    Gradients grads;
};

// Loss and d(loss)/d(params) of one batch, targets from target_net.
inline BatchEval batch_gradients(const QNetwork& net, const QNetwork& target_net,
                                 std::span<const Transition> batch, const TrainingConfig& cfg) {
    if (batch.empty()) throw Error(ErrorKind::InsufficientData, "train_step: empty batch");
    BatchEval be{0.0, Gradients(net)};
    const double bsz = static_cast<double>(batch.size());
    for (const auto& tr : batch) {
        if (tr.action < -1 || tr.action > 1)
            throw Error(ErrorKind::Domain, "transition action outside {-1,0,1}");
        double y = tr.reward;
        if (!tr.terminal) {
            const auto next_q = forward(target_net, tr.next_state).q;
            y = td_target(tr.reward, next_q, cfg.gamma, false);
        }
        const auto trace = detail::forward_trace(net, tr.state);
        const int a_idx = tr.action + 1;
        const double err = trace.q[static_cast<std::size_t>(a_idx)] - y;
        be.loss += err * err / bsz;
        detail::backprop_sequence(net, trace, a_idx, 2.0 * err / bsz, be.grads);
    }
    return be;
}

// Returns the pre-update mean-squared TD error of the batch.
inline double train_step(QNetwork& net, const QNetwork& target_net,
                         std::span<const Transition> batch, const TrainingConfig& cfg) {
    auto be = batch_gradients(net, target_net, batch, cfg);
    if (!std::isfinite(be.loss)) {
        throw Error(ErrorKind::Numeric,
                    "train_step: non-finite loss (gradient norm " +
                        std::to_string(std::sqrt(be.grads.squared_norm())) + ")");
    }
    const double a = cfg.alpha;
    const Gradients& grads = be.grads;
    for (int gi = 0; gi < 4; ++gi) {
        for (std::size_t p = 0; p < net.w_in[gi].v.size(); ++p) net.w_in[gi].v[p] -= a * grads.w_in[gi].v[p];
        for (std::size_t p = 0; p < net.w_rec[gi].v.size(); ++p) net.w_rec[gi].v[p] -= a * grads.w_rec[gi].v[p];
        for (std::size_t p = 0; p < net.bias[gi].size(); ++p) net.bias[gi][p] -= a * grads.bias[gi][p];
    }
    for (std::size_t p = 0; p < net.w_out.v.size(); ++p) net.w_out.v[p] -= a * grads.w_out.v[p];
    for (std::size_t p = 0; p < 3; ++p) net.b_out[p] -= a * grads.b_out[p];
    return be.loss;
}

inline void replay_push(ReplayBuffer& buffer, Transition t) { buffer.push(std::move(t)); }

inline std::vector<Transition> replay_sample(const ReplayBuffer& buffer, std::size_t batch, Rng& rng) {
    return buffer.sample(batch, rng);
}

}  // namespace arbr::drqn
