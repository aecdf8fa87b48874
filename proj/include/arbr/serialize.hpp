#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "arbr/config.hpp"
#include "arbr/drqn.hpp"
#include "arbr/io.hpp"
#include "arbr/pca.hpp"

namespace arbr::serialize {

// ---------------------------------------------------------------------------
// Network checkpoints: full training state (both networks, replay buffer,
// rng), so a resumed run continues the exact step sequence.
// ---------------------------------------------------------------------------

struct Checkpoint {
    config::RunConfig cfg;
    int input_width = 0;
    std::size_t step = 0;
    std::size_t total_steps = 0;
    std::uint64_t train_fingerprint = 0;
    bool resumable = true;
    std::string rng_state;
    drqn::QNetwork net;
    drqn::QNetwork target;
    std::vector<drqn::Transition> replay;  // oldest first
};

namespace detail {

inline JVal matrix_rows(const Matrix& m) {
    JVal rows = JVal::arr();
    for (std::size_t i = 0; i < m.rows; ++i)
        rows.push(JVal::num_array(std::vector<double>(m.row_ptr(i), m.row_ptr(i) + m.cols)));
    return rows;
}

inline JVal net_to_jval(const drqn::QNetwork& net) {
    JVal o = JVal::obj();
    o.set("input_width", JVal::integer(net.input_width));
    o.set("hidden", JVal::integer(net.hidden));
    JVal win = JVal::arr(), wrec = JVal::arr(), bias = JVal::arr();
    for (int g = 0; g < 4; ++g) {
        win.push(matrix_rows(net.w_in[g]));
        wrec.push(matrix_rows(net.w_rec[g]));
        bias.push(JVal::num_array(net.bias[g]));
    }
    o.set("w_in", std::move(win));
    o.set("w_rec", std::move(wrec));
    o.set("bias", std::move(bias));
    o.set("w_out", matrix_rows(net.w_out));
    o.set("b_out", JVal::num_array({net.b_out[0], net.b_out[1], net.b_out[2]}));
    return o;
}

inline JVal state_to_flat(const drqn::StateVector& s) { return JVal::num_array(s.flatten()); }

inline JVal seq_to_jval(const std::vector<drqn::StateVector>& seq) {
    JVal a = JVal::arr();
    for (const auto& s : seq) a.push(state_to_flat(s));
    return a;
}

using nlohmann::json;

inline Matrix matrix_from(const json& j, std::size_t rows, std::size_t cols, const char* what) {
    if (!j.is_array() || j.size() != rows)
        throw Error(ErrorKind::Schema, std::string("checkpoint: bad ") + what);
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& row = j.at(i);
        if (!row.is_array() || row.size() != cols)
            throw Error(ErrorKind::Schema, std::string("checkpoint: bad ") + what);
        for (std::size_t c = 0; c < cols; ++c) m(i, c) = row.at(c).get<double>();
    }
    return m;
}

inline drqn::QNetwork net_from_jval(const json& j) {
    drqn::QNetwork net;
    net.input_width = j.at("input_width").get<int>();
    net.hidden = j.at("hidden").get<int>();
    const std::size_t h = static_cast<std::size_t>(net.hidden);
    const std::size_t w = static_cast<std::size_t>(net.input_width);
    for (int g = 0; g < 4; ++g) {
        net.w_in[g] = matrix_from(j.at("w_in").at(g), h, w, "w_in");
        net.w_rec[g] = matrix_from(j.at("w_rec").at(g), h, h, "w_rec");
        net.bias[g] = j.at("bias").at(g).get<std::vector<double>>();
        if (net.bias[g].size() != h) throw Error(ErrorKind::Schema, "checkpoint: bad bias");
    }
    net.w_out = matrix_from(j.at("w_out"), 3, h, "w_out");
    const auto bo = j.at("b_out").get<std::vector<double>>();
    if (bo.size() != 3) throw Error(ErrorKind::Schema, "checkpoint: bad b_out");
    for (int a = 0; a < 3; ++a) net.b_out[a] = bo[a];
    return net;
}

inline drqn::StateVector state_from_flat(const std::vector<double>& flat, std::size_t n_returns,
                                         std::size_t n_pca) {
    if (flat.size() != n_returns + n_pca + 2)
        throw Error(ErrorKind::Schema, "checkpoint: state width mismatch");
    drqn::StateVector s;
    s.returns.assign(flat.begin(), flat.begin() + static_cast<std::ptrdiff_t>(n_returns));
    s.pca.assign(flat.begin() + static_cast<std::ptrdiff_t>(n_returns),
                 flat.begin() + static_cast<std::ptrdiff_t>(n_returns + n_pca));
    s.ar = flat[flat.size() - 2];
    s.br = flat[flat.size() - 1];
    return s;
}

}  // namespace detail

// include_replay keeps the full training state for exact resumption; without
// it the checkpoint holds the networks only (enough for evaluation).
inline std::string checkpoint_to_json(const Checkpoint& ck, bool include_replay = true) {
    JVal o = JVal::obj();
    o.set("version", JVal::integer(1));
    o.set("kind", JVal::str("drqn-checkpoint"));
    o.set("config", config::to_jval(ck.cfg));
    o.set("train_hash", JVal::str(std::to_string(config::train_hash(ck.cfg))));
    o.set("seed", JVal::uinteger(ck.cfg.seed));
    o.set("input_width", JVal::integer(ck.input_width));
    o.set("step", JVal::uinteger(ck.step));
    o.set("total_steps", JVal::uinteger(ck.total_steps));
    o.set("train_fingerprint", JVal::str(std::to_string(ck.train_fingerprint)));
    o.set("resumable", JVal::boolean(include_replay));
    o.set("rng_state", JVal::str(ck.rng_state));
    o.set("net", detail::net_to_jval(ck.net));
    o.set("target", detail::net_to_jval(ck.target));
    JVal replay = JVal::obj();
    replay.set("capacity", JVal::uinteger(ck.cfg.train.replay_capacity));
    JVal layout = JVal::obj();
    layout.set("returns", JVal::integer(ck.cfg.data.return_window));
    layout.set("pca", JVal::uinteger(ck.cfg.pca_k));
    replay.set("state_layout", std::move(layout));
    JVal items = JVal::arr();
    if (include_replay) {
        for (const auto& tr : ck.replay) {
            JVal t = JVal::obj();
            t.set("state", detail::seq_to_jval(tr.state));
            t.set("action", JVal::integer(tr.action));
            t.set("reward", JVal::num(tr.reward));
            t.set("next_state", detail::seq_to_jval(tr.next_state));
            t.set("terminal", JVal::boolean(tr.terminal));
            items.push(std::move(t));
        }
    }
    replay.set("items", std::move(items));
    o.set("replay", std::move(replay));
    return o.dump(0);
}

inline pca::PcaModel pca_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("pca model: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw Error(ErrorKind::Schema, "pca model: unsupported version");
        pca::PcaModel m;
        m.d = j.at("d").get<std::size_t>();
        m.k = j.at("k").get<std::size_t>();
        m.mean = j.at("mean").get<std::vector<double>>();
        if (m.mean.size() != m.d) throw Error(ErrorKind::Schema, "pca model: bad mean width");
        m.components = detail::matrix_from(j.at("components"), m.k, m.d, "components");
        m.eigenvalues = j.at("eigenvalues").get<std::vector<double>>();
        if (m.eigenvalues.size() != m.k) throw Error(ErrorKind::Schema, "pca model: bad eigenvalue count");
        m.total_variance = j.at("total_variance").get<double>();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("pca model: ") + e.what());
    }
}

inline Checkpoint checkpoint_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("checkpoint: ") + e.what());
    }
    try {
        if (j.at("version").get<int>() != 1)
            throw Error(ErrorKind::Schema, "checkpoint: unsupported version");
        Checkpoint ck;
        config::apply_json(j.at("config"), ck.cfg);
        ck.input_width = j.at("input_width").get<int>();
        ck.step = j.at("step").get<std::size_t>();
        ck.total_steps = j.at("total_steps").get<std::size_t>();
        ck.train_fingerprint = std::stoull(j.at("train_fingerprint").get<std::string>());
        ck.resumable = j.value("resumable", true);
        ck.rng_state = j.at("rng_state").get<std::string>();
        ck.net = detail::net_from_jval(j.at("net"));
        ck.target = detail::net_from_jval(j.at("target"));
        const auto& rep = j.at("replay");
        const std::size_t n_ret = rep.at("state_layout").at("returns").get<std::size_t>();
        const std::size_t n_pca = rep.at("state_layout").at("pca").get<std::size_t>();
        for (const auto& item : rep.at("items")) {
            drqn::Transition tr;
            for (const auto& flat : item.at("state"))
                tr.state.push_back(detail::state_from_flat(flat.get<std::vector<double>>(), n_ret, n_pca));
            for (const auto& flat : item.at("next_state"))
                tr.next_state.push_back(detail::state_from_flat(flat.get<std::vector<double>>(), n_ret, n_pca));
            tr.action = item.at("action").get<int>();
            tr.reward = item.at("reward").get<double>();
            tr.terminal = item.at("terminal").get<bool>();
            ck.replay.push_back(std::move(tr));
        }
        return ck;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Schema, std::string("checkpoint: ") + e.what());
    }
}

}  // namespace arbr::serialize
