#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "ussl/matrix.hpp"

using namespace ussl;

namespace {

// Independent oracle: naive triple loop, same k-ascending summation order as
// the implementation so equality can be exact.
Matrix matmul_oracle(const Matrix& a, const Matrix& b) {
    Matrix out(a.rows, b.cols);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < b.cols; ++j)
            for (std::size_t k = 0; k < a.cols; ++k) out(i, j) += a(i, k) * b(k, j);
    return out;
}

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng, double lim = 1.0) {
    std::uniform_real_distribution<double> dist(-lim, lim);
    Matrix m(r, c);
    for (double& v : m.data) v = dist(rng);
    return m;
}

}  // namespace

TEST(Matmul, IdentityCase) {
    const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
    EXPECT_EQ(matmul(Matrix::identity(2), a), a);
}

TEST(Matmul, AnnihilatingProduct) {
    const Matrix a = Matrix::from_rows({{1, 0}, {0, 0}});
    const Matrix b = Matrix::from_rows({{0, 0}, {0, 1}});
    EXPECT_EQ(matmul(a, b), Matrix(2, 2, 0.0));
}

TEST(Matmul, MatchesTripleLoopOracleBitForBit) {
    std::mt19937_64 rng(7);
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(4, 2, rng);
    EXPECT_EQ(matmul(a, b), matmul_oracle(a, b));
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
    try {
        matmul(Matrix(2, 3), Matrix(4, 2));
        FAIL() << "expected a dimension error";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
        EXPECT_NE(msg.find("4x2"), std::string::npos) << msg;
    }
}

TEST(Affine, IdentityWeights) {
    const Matrix x = Matrix::from_rows({{1, 1}});
    const Matrix b = Matrix(1, 2, 0.0);
    EXPECT_EQ(affine(x, Matrix::identity(2), b), x);
}

TEST(Affine, ZeroInputPassesBias) {
    std::mt19937_64 rng(3);
    const Matrix w = random_matrix(2, 2, rng);
    const Matrix b = Matrix::from_rows({{5, 7}});
    EXPECT_EQ(affine(Matrix(1, 2, 0.0), w, b), b);
}

TEST(Affine, MatchesMatmulPlusBroadcastOracle) {
    std::mt19937_64 rng(11);
    const Matrix x = random_matrix(5, 3, rng);
    const Matrix w = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(1, 4, rng);
    Matrix expected = matmul_oracle(x, w);
    for (std::size_t i = 0; i < expected.rows; ++i)
        for (std::size_t j = 0; j < expected.cols; ++j) expected(i, j) += b(0, j);
    EXPECT_EQ(affine(x, w, b), expected);
}

TEST(Activations, ReluClampsNegatives) {
    EXPECT_EQ(relu(Matrix::from_rows({{-1, 2}})), Matrix::from_rows({{0, 2}}));
}

TEST(Activations, SigmoidSymmetryAtZero) {
    EXPECT_DOUBLE_EQ(sigmoid(Matrix(1, 1, 0.0))(0, 0), 0.5);
}

TEST(Activations, SoftmaxSymmetry) {
    const Matrix p = softmax_rows(Matrix(1, 2, 0.0));
    EXPECT_DOUBLE_EQ(p(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(p(0, 1), 0.5);
}

TEST(Activations, SoftmaxRowsSumToOne) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix p = softmax_rows(random_matrix(4, 6, rng, 30.0));
        for (std::size_t i = 0; i < p.rows; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < p.cols; ++j) {
                s += p(i, j);
                EXPECT_GE(p(i, j), 0.0);
                EXPECT_LE(p(i, j), 1.0);
            }
            EXPECT_NEAR(s, 1.0, 1e-12);
        }
    }
}

TEST(Losses, PerfectCrossEntropyIsTiny) {
    const Matrix probs = Matrix::from_rows({{1, 0}, {0, 1}});
    const Matrix targets = probs;
    EXPECT_LE(cross_entropy(probs, targets), 1e-6);
}

TEST(Losses, MseOfIdenticalInputsIsZero) {
    std::mt19937_64 rng(5);
    const Matrix a = random_matrix(3, 3, rng);
    EXPECT_DOUBLE_EQ(mse(a, a), 0.0);
}

TEST(Losses, BceAtHalfIsLogTwo) {
    const Matrix yhat(1, 1, 0.5), y(1, 1, 0.0), w(1, 1, 1.0);
    EXPECT_NEAR(bce(yhat, y, w), std::log(2.0), 1e-12);
}

TEST(Losses, ShapeMismatchThrows) {
    EXPECT_THROW(cross_entropy(Matrix(2, 3), Matrix(2, 2)), std::invalid_argument);
    EXPECT_THROW(mse(Matrix(2, 3), Matrix(3, 2)), std::invalid_argument);
    EXPECT_THROW(bce(Matrix(2, 1), Matrix(3, 1), Matrix(2, 1)), std::invalid_argument);
}
