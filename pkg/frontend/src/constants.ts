/**
 * Domain constants mirrored from the server's validation rules so forms can
 * give immediate feedback without a round trip. Keep in sync with the
 * registry service; values are asserted against the live API in the
 * end-to-end suite.
 */

export const SECTION_KINDS = [
  "model_details",
  "deployment_details",
  "environment_details",
  "feature_sets",
  "datasets",
  "learning_process",
  "population_details",
  "experiment_details",
  "study_details",
  "evaluation_measures",
  "model_figures",
  "surveys",
  "parameters",
  "audit",
] as const;

export type SectionKind = (typeof SECTION_KINDS)[number];

/** The one section every passport must carry. */
export const LOCKED_SECTION: SectionKind = "model_details";

export const SECTION_TITLES: Record<SectionKind, string> = {
  model_details: "Model Details",
  deployment_details: "Model Deployment Details",
  environment_details: "Environment Details",
  feature_sets: "Feature Sets",
  datasets: "Datasets",
  learning_process: "Learning Processes",
  population_details: "Population Details",
  experiment_details: "Experiment Details",
  study_details: "Study Details",
  evaluation_measures: "Evaluation Measures",
  model_figures: "Model Figures",
  surveys: "Surveys",
  parameters: "Parameters",
  audit: "Audit Log Book",
};

export const ROLES = [
  "Admin",
  "OrganizationAdmin",
  "StudyOwner",
  "SurveyManager",
  "DataEngineer",
  "DataScientist",
  "MLEngineer",
  "QualityAssuranceSpecialist",
] as const;

export type Role = (typeof ROLES)[number];

export const FEATURE_DATA_TYPES = [
  "string", "integer", "decimal", "boolean", "datetime",
] as const;

export const MEASURE_DATA_TYPES = ["float", "integer", "string"] as const;

export const STAGE_TYPES = [
  "training", "validation", "testing", "federated_aggregation",
] as const;

export const DEPLOYMENT_STATUSES = [
  "DRAFT", "VALIDATING", "PRODUCTION", "RETIRED",
] as const;

export const SURVEY_CATEGORIES = [
  "bias", "ethics", "governance", "limitation", "other",
] as const;

export const TRL_PATTERN = /^TRL[1-9]$/;

export const STAGE_PERCENTAGE_MIN = 0;
export const STAGE_PERCENTAGE_MAX = 100;
