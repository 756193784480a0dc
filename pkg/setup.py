#!/usr/bin/env python
# -*- coding: utf-8 -*-
import os

from setuptools import setup


# Utility function to read the README file.
# Used for the long_description.
def read(fname):
    return open(os.path.join(os.path.dirname(__file__), fname)).read()


install_requirements = list(set(
    requirement.strip()
    for requirement in open('requirements.txt')
    if requirement.strip() and not requirement.lstrip().startswith('#')
))

setup(
    name='trapcal',
    description=('Noise estimation from the test rounds of verifiable blind quantum computation'),
    license='BSD-3',
    keywords='quantum verification blind-computation noise-estimation simulation commandline',
    packages=['trapcal'],
    package_data={
        "trapcal": ["data/*.yaml"],
    },
    install_requires=install_requirements,
    use_scm_version={'fallback_version': '0.1.0'},
    setup_requires=['setuptools_scm'],
    long_description=read('README.md'),
    classifiers=[
        'Development Status :: 2 - Pre-Alpha',
        'Topic :: Scientific/Engineering :: Physics',
    ],
    entry_points={
        'console_scripts': [
            'trapcal = trapcal.cli:trapcal',
        ],
    },
)
