#pragma once

// Everything except the command layer (which needs OpenSSL): include hbl/cli.hpp for that.
#include "hbl/common.hpp"
#include "hbl/spectral.hpp"
#include "hbl/grid_field.hpp"
#include "hbl/forms.hpp"
#include "hbl/hermitian.hpp"
#include "hbl/random.hpp"
#include "hbl/geometry.hpp"
#include "hbl/background.hpp"
#include "hbl/bundle.hpp"
#include "hbl/hessian.hpp"
#include "hbl/functional.hpp"
#include "hbl/solver.hpp"
#include "hbl/verify.hpp"
#include "hbl/snapshot.hpp"
