#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <vector>

namespace decompgrind {

struct LstmShape {
    int input = 6;
    int hidden = 64;
    int layers = 2;
    int output = 6;
    // The head also sees the last input step, y = W [h_T; x_T] + b.
    bool skip = true;

    void validate() const;
    friend bool operator==(const LstmShape&, const LstmShape&) = default;
};

/// Stacked LSTM with an affine head on the last time step. Sequences are
/// passed as T matrices of shape (input x batch), oldest first.
class LstmRegressor {
public:
    LstmRegressor() = default;
    LstmRegressor(const LstmShape& shape, std::uint64_t seed);

    [[nodiscard]] const LstmShape& shape() const { return shape_; }

    [[nodiscard]] Eigen::MatrixXd forward(const std::vector<Eigen::MatrixXd>& seq) const;

    /// Mean squared error over all outputs of the batch; fills the gradients.
    double loss_and_gradient(const std::vector<Eigen::MatrixXd>& seq, const Eigen::MatrixXd& target);

    /// Adam update with the gradients from the last loss_and_gradient() call.
    void adam_step(double learning_rate, double clip_norm = 5.0);

    void save(std::ostream& out) const;
    void load(std::istream& in);  // shape must already match

    [[nodiscard]] std::size_t parameter_count() const;

private:
    struct Param {
        Eigen::MatrixXd value, grad, m, v;
        void init(Eigen::Index rows, Eigen::Index cols);
    };
    struct Layer {
        Param w;  // 4H x (in + H), gate rows i, f, g, o
        Param b;  // 4H x 1
    };
    struct Cache {
        std::vector<Eigen::MatrixXd> xh, i, f, g, o, c, tc;
    };

    [[nodiscard]] std::vector<Param*> params();
    Eigen::MatrixXd run(const std::vector<Eigen::MatrixXd>& seq, std::vector<Cache>* caches,
                        Eigen::MatrixXd* head_in) const;

    LstmShape shape_;
    std::vector<Layer> layers_;
    Param head_w_, head_b_;
    long adam_t_ = 0;
};

}  // namespace decompgrind
