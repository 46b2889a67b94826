#pragma once

// Umbrella header for the whole library.

#include "bbx/adv_train.hpp"
#include "bbx/attacks/boundary.hpp"
#include "bbx/attacks/common.hpp"
#include "bbx/attacks/dispatch.hpp"
#include "bbx/attacks/hopskipjump.hpp"
#include "bbx/attacks/mga.hpp"
#include "bbx/attacks/simba.hpp"
#include "bbx/cifar10.hpp"
#include "bbx/config.hpp"
#include "bbx/dataset.hpp"
#include "bbx/defenses.hpp"
#include "bbx/errors.hpp"
#include "bbx/external_oracle.hpp"
#include "bbx/harness.hpp"
#include "bbx/image.hpp"
#include "bbx/jpeg.hpp"
#include "bbx/metrics.hpp"
#include "bbx/model.hpp"
#include "bbx/oracle.hpp"
#include "bbx/ppm.hpp"
#include "bbx/rng.hpp"
#include "bbx/train.hpp"
#include "bbx/weights_io.hpp"
