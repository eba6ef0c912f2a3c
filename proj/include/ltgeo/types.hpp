#pragma once

#include <Eigen/Core>

namespace ltgeo {

template <class ScalarType>
using MatX = Eigen::Matrix<ScalarType, Eigen::Dynamic, Eigen::Dynamic>;

template <class ScalarType>
using VecX = Eigen::Matrix<ScalarType, Eigen::Dynamic, 1>;

template <class ScalarType>
using RowVecX = Eigen::Matrix<ScalarType, 1, Eigen::Dynamic>;

template <class ScalarType>
using ArrX = Eigen::Array<ScalarType, Eigen::Dynamic, 1>;

template <class ScalarType>
using ArrXX = Eigen::Array<ScalarType, Eigen::Dynamic, Eigen::Dynamic>;

// All numerical state is carried in 64-bit floats; reproducibility across
// runs on one platform is part of the contract.
using Scalar = double;
using Mat = MatX<Scalar>;
using Vec = VecX<Scalar>;
using RowVec = RowVecX<Scalar>;
using Arr = ArrX<Scalar>;
using ArrXXd = ArrXX<Scalar>;
using IdxVec = VecX<Eigen::Index>;
using index_t = Eigen::Index;

}  // namespace ltgeo
