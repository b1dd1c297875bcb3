#ifndef VIEWSYNTH_VIEWSYNTH_HPP
#define VIEWSYNTH_VIEWSYNTH_HPP

#include "viewsynth/common.hpp"
#include "viewsynth/core.hpp"
#include "viewsynth/experiment.hpp"
#include "viewsynth/hog.hpp"
#include "viewsynth/image.hpp"
#include "viewsynth/io.hpp"
#include "viewsynth/pose.hpp"
#include "viewsynth/retrieval.hpp"
#include "viewsynth/surrogate.hpp"
#include "viewsynth/synthesis.hpp"
#include "viewsynth/synthgen.hpp"
#include "viewsynth/vocab.hpp"

#endif
