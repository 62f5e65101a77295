#pragma once

#include "lacuna/baselines.hpp"
#include "lacuna/checkpoint.hpp"
#include "lacuna/corpus.hpp"
#include "lacuna/error.hpp"
#include "lacuna/eval.hpp"
#include "lacuna/manifest.hpp"
#include "lacuna/masking.hpp"
#include "lacuna/model.hpp"
#include "lacuna/pipeline.hpp"
#include "lacuna/predict.hpp"
#include "lacuna/rank.hpp"
#include "lacuna/trainer.hpp"
#include "lacuna/vocab.hpp"
