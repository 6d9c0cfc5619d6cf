/**
 * Session state and role-driven navigation: the console shows only the
 * pages owned by roles the signed-in user actually holds.
 */

import type { Role } from "./constants.js";
import type { RoleAssignment } from "./api.js";

export interface SessionState {
  token: string;
  subject: string;
  assignments: RoleAssignment[];
  activeStudyId: string;
}

/** Pages owned by each role. Union over held roles drives the navigation. */
export const PAGE_MAP: Record<Role, string[]> = {
  Admin: ["Audit Log"],
  OrganizationAdmin: ["Organization Management", "Personnel Management"],
  StudyOwner: ["Study Management", "Study Creation"],
  SurveyManager: ["Study Selection", "Survey Management"],
  DataEngineer: ["Study Selection", "Feature Management", "Dataset Management"],
  DataScientist: [
    "Study Selection",
    "Parameter Management",
    "Learning Process Management",
    "Model Management",
  ],
  MLEngineer: ["Study Selection", "Deployment Management"],
  QualityAssuranceSpecialist: ["Study Selection", "Passport Management"],
};

const PAGE_ORDER = [
  "Study Selection",
  "Study Management",
  "Study Creation",
  "Organization Management",
  "Personnel Management",
  "Survey Management",
  "Feature Management",
  "Dataset Management",
  "Parameter Management",
  "Learning Process Management",
  "Model Management",
  "Deployment Management",
  "Passport Management",
  "Audit Log",
];

export function rolesOf(session: SessionState): Set<string> {
  return new Set(session.assignments.map((a) => a.role));
}

/** Roles scoped to the currently selected study (global roles always count). */
export function activeRoles(session: SessionState): Set<string> {
  const out = new Set<string>();
  for (const a of session.assignments) {
    if (a.studyId === "" || a.studyId === session.activeStudyId) {
      out.add(a.role);
    }
  }
  return out;
}

export function pagesFor(session: SessionState): string[] {
  const pages = new Set<string>();
  for (const role of rolesOf(session)) {
    for (const page of PAGE_MAP[role as Role] ?? []) {
      pages.add(page);
    }
  }
  return PAGE_ORDER.filter((p) => pages.has(p));
}

export function canVisit(session: SessionState, page: string): boolean {
  return pagesFor(session).includes(page);
}

/** Table footer text matching the server's page/pageSize/total contract. */
export function formatShowing(
  page: number,
  pageSize: number,
  total: number,
): string {
  if (total === 0) {
    return "Showing 0 to 0 of 0 entries";
  }
  const first = (page - 1) * pageSize + 1;
  const last = Math.min(page * pageSize, total);
  return `Showing ${first} to ${last} of ${total} entries`;
}
