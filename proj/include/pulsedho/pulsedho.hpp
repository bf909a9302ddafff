#pragma once

#include "pulsedho/closed_form.hpp"
#include "pulsedho/error.hpp"
#include "pulsedho/evaluate.hpp"
#include "pulsedho/fitting.hpp"
#include "pulsedho/forcing.hpp"
#include "pulsedho/model.hpp"
#include "pulsedho/oracle.hpp"
