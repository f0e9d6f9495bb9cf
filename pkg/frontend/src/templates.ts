// Query templates preloaded into the analyst editor.

export interface Template {
  name: string;
  program: string;
}

export const TEMPLATES: Template[] = [
  {
    name: "Noisy row count (coordinate pairs)",
    program: `plam . df : M [L1, U | star, dR :: dR :: []] =>
  let eps = R+[1.0] in
  let delta = R+[0.001] in
  gauss[R+[1.0], eps, delta] <df> { real (rows df) }`,
  },
  {
    name: "Noisy row count (laplace, pure epsilon)",
    program: `plam . df : M [L1, U | star, dR :: dR :: []] =>
  laplace[R+[1.0], R+[0.5]] <df> { real (rows df) }`,
  },
  {
    name: "Gaussian over a single number",
    program: `plam . x : R => gauss[R+[1.0], R+[1.0], R+[0.001]] <x> { x }`,
  },
];
