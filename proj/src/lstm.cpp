#include "decompgrind/lstm.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <stdexcept>

namespace decompgrind {

using Eigen::MatrixXd;

void LstmShape::validate() const {
    if (input < 1 || hidden < 1 || layers < 1 || output < 1) throw std::invalid_argument("LSTM dimensions must be >= 1");
}

void LstmRegressor::Param::init(Eigen::Index rows, Eigen::Index cols) {
    value = MatrixXd::Zero(rows, cols);
    grad = MatrixXd::Zero(rows, cols);
    m = MatrixXd::Zero(rows, cols);
    v = MatrixXd::Zero(rows, cols);
}

LstmRegressor::LstmRegressor(const LstmShape& shape, std::uint64_t seed) : shape_(shape) {
    shape.validate();
    std::mt19937_64 rng(seed);
    const int H = shape.hidden;
    auto fill = [&](MatrixXd& m, double scale) {
        std::uniform_real_distribution<double> u(-scale, scale);
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = u(rng);
    };
    for (int l = 0; l < shape.layers; ++l) {
        const int in = l == 0 ? shape.input : H;
        Layer layer;
        layer.w.init(4 * H, in + H);
        layer.b.init(4 * H, 1);
        fill(layer.w.value, 1.0 / std::sqrt(static_cast<double>(in + H)));
        layer.b.value.block(H, 0, H, 1).setOnes();  // forget gate starts open
        layers_.push_back(std::move(layer));
    }
    const int head_in = H + (shape.skip ? shape.input : 0);
    head_w_.init(shape.output, head_in);
    head_b_.init(shape.output, 1);
    fill(head_w_.value, 1.0 / std::sqrt(static_cast<double>(head_in)));
}

std::vector<LstmRegressor::Param*> LstmRegressor::params() {
    std::vector<Param*> p;
    for (auto& l : layers_) {
        p.push_back(&l.w);
        p.push_back(&l.b);
    }
    p.push_back(&head_w_);
    p.push_back(&head_b_);
    return p;
}

std::size_t LstmRegressor::parameter_count() const {
    std::size_t n = static_cast<std::size_t>(head_w_.value.size() + head_b_.value.size());
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.value.size() + l.b.value.size());
    return n;
}

namespace {

MatrixXd sigmoid(const MatrixXd& z) { return (1.0 / (1.0 + (-z.array()).exp())).matrix(); }

}  // namespace

MatrixXd LstmRegressor::run(const std::vector<MatrixXd>& seq, std::vector<Cache>* caches, MatrixXd* head_in) const {
    if (seq.empty()) throw std::invalid_argument("empty input sequence");
    const int H = shape_.hidden;
    const Eigen::Index B = seq.front().cols();
    for (const auto& x : seq) {
        if (x.rows() != shape_.input || x.cols() != B) throw std::invalid_argument("input sequence has the wrong shape");
    }
    const std::size_t T = seq.size();
    if (caches) caches->assign(layers_.size(), Cache{});

    std::vector<MatrixXd> inputs = seq;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const auto& layer = layers_[l];
        const Eigen::Index in = inputs.front().rows();
        MatrixXd h = MatrixXd::Zero(H, B), c = MatrixXd::Zero(H, B);
        std::vector<MatrixXd> outputs(T);
        Cache* cache = caches ? &(*caches)[l] : nullptr;
        for (std::size_t t = 0; t < T; ++t) {
            MatrixXd xh(in + H, B);
            xh.topRows(in) = inputs[t];
            xh.bottomRows(H) = h;
            MatrixXd z = layer.w.value * xh;
            z.colwise() += layer.b.value.col(0);
            MatrixXd ig = sigmoid(z.middleRows(0, H));
            MatrixXd fg = sigmoid(z.middleRows(H, H));
            MatrixXd gg = z.middleRows(2 * H, H).array().tanh().matrix();
            MatrixXd og = sigmoid(z.middleRows(3 * H, H));
            c = (fg.array() * c.array() + ig.array() * gg.array()).matrix();
            MatrixXd tc = c.array().tanh().matrix();
            h = (og.array() * tc.array()).matrix();
            outputs[t] = h;
            if (cache) {
                cache->xh.push_back(std::move(xh));
                cache->i.push_back(std::move(ig));
                cache->f.push_back(std::move(fg));
                cache->g.push_back(std::move(gg));
                cache->o.push_back(std::move(og));
                cache->c.push_back(c);
                cache->tc.push_back(std::move(tc));
            }
        }
        inputs = std::move(outputs);
    }

    MatrixXd hin(head_w_.value.cols(), B);
    hin.topRows(H) = inputs.back();
    if (shape_.skip) hin.bottomRows(shape_.input) = seq.back();
    MatrixXd y = head_w_.value * hin;
    y.colwise() += head_b_.value.col(0);
    if (head_in) *head_in = std::move(hin);
    return y;
}

MatrixXd LstmRegressor::forward(const std::vector<MatrixXd>& seq) const { return run(seq, nullptr, nullptr); }

double LstmRegressor::loss_and_gradient(const std::vector<MatrixXd>& seq, const MatrixXd& target) {
    std::vector<Cache> caches;
    MatrixXd hin;
    const MatrixXd y = run(seq, &caches, &hin);
    if (target.rows() != y.rows() || target.cols() != y.cols()) throw std::invalid_argument("target has the wrong shape");
    const int H = shape_.hidden;
    const std::size_t T = seq.size();
    const Eigen::Index B = y.cols();
    const double scale = 1.0 / static_cast<double>(y.size());

    const MatrixXd diff = y - target;
    const double loss = diff.squaredNorm() * scale;
    const MatrixXd dy = 2.0 * scale * diff;

    for (auto* p : params()) p->grad.setZero();
    head_w_.grad = dy * hin.transpose();
    head_b_.grad = dy.rowwise().sum();

    // gradient arriving at each layer's output per time step
    std::vector<MatrixXd> dh_in(T, MatrixXd::Zero(H, B));
    dh_in[T - 1] = head_w_.value.leftCols(H).transpose() * dy;

    for (std::size_t l = layers_.size(); l-- > 0;) {
        auto& layer = layers_[l];
        const Cache& k = caches[l];
        const Eigen::Index in = k.xh.front().rows() - H;
        MatrixXd dh_rec = MatrixXd::Zero(H, B), dc_rec = MatrixXd::Zero(H, B);
        std::vector<MatrixXd> dx(T);
        MatrixXd dz(4 * H, B);
        for (std::size_t t = T; t-- > 0;) {
            const MatrixXd dh = dh_in[t] + dh_rec;
            const auto& ig = k.i[t].array();
            const auto& fg = k.f[t].array();
            const auto& gg = k.g[t].array();
            const auto& og = k.o[t].array();
            const auto& tc = k.tc[t].array();
            const MatrixXd c_prev = t > 0 ? k.c[t - 1] : MatrixXd::Zero(H, B);
            const MatrixXd dc = (dh.array() * og * (1.0 - tc.square()) + dc_rec.array()).matrix();
            dz.middleRows(0, H) = (dc.array() * gg * ig * (1.0 - ig)).matrix();
            dz.middleRows(H, H) = (dc.array() * c_prev.array() * fg * (1.0 - fg)).matrix();
            dz.middleRows(2 * H, H) = (dc.array() * ig * (1.0 - gg.square())).matrix();
            dz.middleRows(3 * H, H) = (dh.array() * tc * og * (1.0 - og)).matrix();
            dc_rec = (dc.array() * fg).matrix();
            layer.w.grad.noalias() += dz * k.xh[t].transpose();
            layer.b.grad += dz.rowwise().sum();
            const MatrixXd dxh = layer.w.value.transpose() * dz;
            dx[t] = dxh.topRows(in);
            dh_rec = dxh.bottomRows(H);
        }
        dh_in = std::move(dx);
    }
    return loss;
}

void LstmRegressor::adam_step(double lr, double clip_norm) {
    constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    auto ps = params();
    double norm2 = 0.0;
    for (auto* p : ps) norm2 += p->grad.squaredNorm();
    const double norm = std::sqrt(norm2);
    const double clip = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
    ++adam_t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t_));
    for (auto* p : ps) {
        const MatrixXd g = clip * p->grad;
        p->m = beta1 * p->m + (1.0 - beta1) * g;
        p->v = (beta2 * p->v.array() + (1.0 - beta2) * g.array().square()).matrix();
        p->value.array() -= lr * (p->m.array() / c1) / ((p->v.array() / c2).sqrt() + eps);
    }
}

void LstmRegressor::save(std::ostream& out) const {
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    auto put = [&](const MatrixXd& m) {
        for (Eigen::Index k = 0; k < m.size(); ++k) out << m.data()[k] << (k + 1 == m.size() ? '\n' : ' ');
    };
    for (const auto& l : layers_) {
        put(l.w.value);
        put(l.b.value);
    }
    put(head_w_.value);
    put(head_b_.value);
}

void LstmRegressor::load(std::istream& in) {
    for (auto* p : params()) {
        for (Eigen::Index k = 0; k < p->value.size(); ++k) {
            if (!(in >> p->value.data()[k])) throw std::invalid_argument("truncated LSTM weights");
            if (!std::isfinite(p->value.data()[k])) throw std::invalid_argument("non-finite LSTM weight");
        }
    }
    adam_t_ = 0;
}

}  // namespace decompgrind
