#include <stdexcept>

#include "lowrank/factored.hpp"
#include "lowrank/serialize.hpp"

namespace lowrank {

Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const Json& j) {
  if (!j.is_array() || j.empty()) throw std::invalid_argument("matrix json: expected rows");
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j.front().size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& row = j.at(static_cast<std::size_t>(i));
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("matrix json: ragged rows");
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = row.at(static_cast<std::size_t>(c)).get<double>();
  }
  return m;
}

Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Vector vector_from_json(const Json& j) {
  if (!j.is_array()) throw std::invalid_argument("vector json: expected array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

Json loss_to_json(const MatrixLoss& loss) {
  if (const auto* lin = dynamic_cast<const LinearLoss*>(&loss)) {
    const LinearOperator& op = lin->op();
    Json j{{"kind", "linear"},
           {"n", op.rows()},
           {"m", op.cols()},
           {"p", op.count()},
           {"scale", op.scale()},
           {"d", vector_to_json(lin->measurements())}};
    if (op.seed()) {
      j["seed"] = *op.seed();
    } else {
      Json a = Json::array();
      for (Eigen::Index i = 0; i < op.count(); ++i) a.push_back(matrix_to_json(op.sensing_matrix(i)));
      j["A"] = std::move(a);
    }
    return j;
  }
  if (const auto* ob = dynamic_cast<const OneBitLoss*>(&loss)) {
    return Json{{"kind", "onebit"},
                {"n", ob->rows()},
                {"scale", ob->scale()},
                {"Y", matrix_to_json(ob->frequencies())}};
  }
  if (const auto* lf = dynamic_cast<const LiftedLoss*>(&loss)) {
    return Json{{"kind", "lifted"},
                {"n", lf->n()},
                {"m", lf->m()},
                {"phi", lf->phi()},
                {"inner", loss_to_json(lf->inner())}};
  }
  throw std::invalid_argument("loss_to_json: unsupported loss kind " + loss.kind());
}

std::shared_ptr<const MatrixLoss> loss_from_json(const Json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "linear") {
    const auto n = j.at("n").get<Eigen::Index>();
    const auto m = j.at("m").get<Eigen::Index>();
    const auto p = j.at("p").get<Eigen::Index>();
    const double scale = j.at("scale").get<double>();
    Vector d = vector_from_json(j.at("d"));
    if (j.contains("seed")) {
      LinearOperator op = make_gaussian_operator(n, m, p, j.at("seed").get<std::uint64_t>());
      return std::make_shared<const LinearLoss>(op.with_scale(scale), std::move(d));
    }
    std::vector<Matrix> sensing;
    for (const Json& a : j.at("A")) sensing.push_back(matrix_from_json(a));
    if (static_cast<Eigen::Index>(sensing.size()) != p)
      throw std::invalid_argument("linear loss json: p does not match the sensing list");
    LinearOperator op(sensing, scale);
    if (op.rows() != n || op.cols() != m)
      throw DimensionError("linear loss json: sensing matrices are not n x m");
    return std::make_shared<const LinearLoss>(std::move(op), std::move(d));
  }
  if (kind == "onebit") {
    Matrix y = matrix_from_json(j.at("Y"));
    if (y.rows() != j.at("n").get<Eigen::Index>())
      throw DimensionError("onebit loss json: Y is not n x n");
    return std::make_shared<const OneBitLoss>(std::move(y), j.at("scale").get<double>());
  }
  if (kind == "lifted") {
    auto inner = loss_from_json(j.at("inner"));
    return lift_asymmetric(std::move(inner), j.at("n").get<Eigen::Index>(),
                           j.at("m").get<Eigen::Index>(), j.at("phi").get<double>());
  }
  throw std::invalid_argument("loss json: unknown kind " + kind);
}

}  // namespace lowrank
